# Copyright 2025 The sgd_stoptime Authors

import datetime
import sys


# log-level definitions as ints
ERROR = 0
WARN = 1
INFO = 2
DEBUG = 3
TRACE = 4

_LEVEL_NAMES = ["ERROR", "WARNING", "INFO", "DEBUG", "TRACE"]

# default global log level
loglevel = WARN


def string_to_loglevel(loglevel_str: str) -> int:
    name = loglevel_str.strip().upper()
    if name == "WARN":
        name = "WARNING"
    if name not in _LEVEL_NAMES:
        raise ValueError(f"Unexpected log level: {loglevel_str}")
    return _LEVEL_NAMES.index(name)


def int_to_loglevel(loglevel_int: int) -> str:
    if loglevel_int < ERROR or loglevel_int > TRACE:
        raise ValueError(f"Unexpected log level: {loglevel_int}")
    return _LEVEL_NAMES[loglevel_int]


# update the loglevel to 'll'
def setloglevel(ll: int):
    global loglevel
    assert (ll >= ERROR and ll <= TRACE)
    loglevel = ll


logcolor_codes = [
    ("\033[91m", "\033[0m"),   # red error
    ("\033[93m", "\033[0m"),   # yellow warning
    ("", ""),
    ("", ""),
    ("", "")
]


def log(level: int, *args):
    if level > loglevel:
        return
    stream = sys.stderr if level <= WARN else sys.stdout
    ts = datetime.datetime.now().isoformat()
    color, reset = logcolor_codes[level]
    text = " ".join(str(a) for a in args)
    print(f"{ts} {color}{int_to_loglevel(level):>8}{reset} {text}", file=stream)
