import logging
import os

import numpy as np
import polars as pl
from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def get_log_level():
    return os.getenv("TGSPEC_LOG_LEVEL", "INFO").upper()


def get_workers():
    # Thread count for sweep evaluation, 1 runs serially
    return max(1, int(os.getenv("TGSPEC_WORKERS", "4")))


def get_out_dir():
    return os.getenv("TGSPEC_OUT_DIR", "out")


def get_ips_max_n():
    return int(os.getenv("TGSPEC_IPS_MAX_N", "60"))


def set_numpy_options():
    # Set all the numpy options here
    np.set_printoptions(precision=6, suppress=True, linewidth=100)


def set_polars_options():
    pl.Config.set_float_precision(None)
    pl.Config.set_tbl_rows(25)


def setup_logging(level=None):
    logging.basicConfig(
        level=(level or get_log_level()).upper(),
        format=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
    )
