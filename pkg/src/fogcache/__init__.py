"""Decentralized asynchronous coded caching for fog radio access networks."""

from .baselines import exhaustive_worst_case, sync_closed_form, uncoded_load
from .delivery import run_delivery
from .encoding_sets import active_interval, active_window, chi_range, collapse, partition_encoding_set
from .model import (
    Config,
    ConfigError,
    FeasibilityError,
    LoadReport,
    RequestSchedule,
    Transmission,
    enumerate_subsets,
    make_subset,
)
from .placement import place_caches, subfile_sizes, type_of

__version__ = "0.1.0"
