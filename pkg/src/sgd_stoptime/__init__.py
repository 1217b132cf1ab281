# Copyright 2025 The sgd_stoptime Authors

try:
    from importlib.metadata import version, PackageNotFoundError
    __version__ = version("sgd_stoptime")
except PackageNotFoundError:
    __version__ = "unknown"

from sgd_stoptime.types import Verdict, DiagnosticWarning
