import os
import time

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import wbml.out as out
from wbml.experiment import WorkingDirectory
from wbml.plot import tweak

from ptmarket import load_config

__all__ = [
    "np",
    "pd",
    "plt",
    "tweak",
    "out",
    "WorkingDirectory",
    "default_config",
    "median_time",
]

out.report_time = True


def default_config(**changes):
    """Load the shipped default configuration.

    Args:
        **changes: Fields to change. Fields set to `None` are left unchanged.

    Returns:
        :class:`ptmarket.SimulationConfig`: Configuration.
    """
    path = os.path.join(os.path.dirname(__file__), "..", "configs", "default.yaml")
    return load_config(path).override(**changes)


def median_time(f, trials=5):
    """Median wall time of a function call.

    Args:
        f (function): Function without arguments.
        trials (int, optional): Number of calls. Defaults to `5`.

    Returns:
        float: Median wall time in seconds.
    """
    times = []
    for _ in range(trials):
        start = time.perf_counter()
        f()
        times.append(time.perf_counter() - start)
    return float(np.median(times))
