import json
import os
from dataclasses import fields
from typing import Union

import numpy as np
import pandas as pd
from plum import Dispatcher

from .config import config_from_dict, dump_config
from .pqr import restore, snapshot
from .simulation import MarketState, PeriodResult, SimulationReport
from .util import ValidationError

__all__ = [
    "REPORT_VERSION",
    "CHECKPOINT_VERSION",
    "FORMATS",
    "write_report",
    "load_report",
    "report_to_dict",
    "report_from_dict",
    "write_json",
    "save_checkpoint",
    "load_checkpoint",
]

_dispatch = Dispatcher()

#: Version of the report format.
REPORT_VERSION = 1

#: Version of the checkpoint format.
CHECKPOINT_VERSION = 1

#: Formats of reports.
FORMATS = ("json", "csv")


@_dispatch
def _to_json(x: np.ndarray):
    return x.tolist()


@_dispatch
def _to_json(x: np.integer):
    return int(x)


@_dispatch
def _to_json(x: np.floating):
    return float(x)


@_dispatch
def _to_json(x: dict):
    return {str(k): _to_json(v) for k, v in x.items()}


@_dispatch
def _to_json(x: Union[list, tuple]):
    return [_to_json(v) for v in x]


@_dispatch
def _to_json(x: object):
    return x


def write_json(obj, path):
    """Write an object as an indented JSON document.

    Args:
        obj (object): Object. NumPy types are converted to built-in types.
        path (str): Path to the file.
    """
    try:
        with open(path, "w") as f:
            json.dump(_to_json(obj), f, indent=2)
            f.write("\n")
    except OSError as e:
        raise OSError(f'Could not write "{path}": {e}') from e


def _read_json(path, what):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise OSError(f'Could not read {what} "{path}": {e}') from e
    except json.JSONDecodeError as e:
        raise ValidationError(f'{what.capitalize()} "{path}" is not valid JSON: {e}')


def report_to_dict(report):
    """Convert a report to a document of built-in types.

    Args:
        report (:class:`.SimulationReport`): Report.

    Returns:
        dict: Document.
    """
    return _to_json(
        {
            "format_version": REPORT_VERSION,
            "version": report.version,
            "seed": report.seed,
            "strategy": report.strategy,
            "traces": report.traces,
            "config": report.config.to_dict(),
            "prosumers": report.ids,
            "periods": [
                {f.name: getattr(r, f.name) for f in fields(PeriodResult)}
                for r in report.results
            ],
            "aggregates": {
                "totals": report.totals,
                "periods": report.periods.to_dict(orient="list"),
            },
            "price_trajectories": {
                prosumer: report.price_trajectories[prosumer].to_numpy()
                for prosumer in report.ids
            },
        }
    )


_VECTORS = {
    "buyer_demands",
    "buyer_costs",
    "buyer_values",
    "seller_surpluses",
    "seller_prices",
    "next_prices",
    "seller_revenues",
    "seller_rewards",
    "posted_prices",
}


def _period_from_dict(d):
    values = {}
    for f in fields(PeriodResult):
        value = d[f.name]
        if f.name in _VECTORS:
            value = np.array(value, dtype=np.float64)
        elif f.name in {"buyer_ids", "seller_ids"}:
            value = tuple(value)
        values[f.name] = value
    values["allocation"] = np.array(values["allocation"], dtype=np.float64).reshape(
        len(values["seller_ids"]), len(values["buyer_ids"])
    )
    return PeriodResult(**values)


def report_from_dict(d):
    """Reconstruct a report from a document produced by :func:`.report_to_dict`.

    The aggregates are recomputed from the periods.

    Args:
        d (dict): Document.

    Returns:
        :class:`.SimulationReport`: Report.
    """
    if d.get("format_version") != REPORT_VERSION:
        raise ValidationError(
            f"Unsupported report format version {d.get('format_version')}; "
            f"expected {REPORT_VERSION}."
        )
    try:
        return SimulationReport(
            config_from_dict(d["config"]),
            d["prosumers"],
            [_period_from_dict(p) for p in d["periods"]],
            traces=d["traces"],
            version=d["version"],
        )
    except (KeyError, TypeError) as e:
        raise ValidationError(f"Malformed report: {e!r}.") from e


def _stem(path):
    stem, ext = os.path.splitext(path)
    return stem if ext else path


def write_report(report, path, format="json"):
    """Write a report.

    In JSON format, the whole report is written as one document to `path`. In CSV
    format, `path` receives one record per period and participating prosumer;
    alongside it, `<stem>_periods.csv` receives the aggregates of every period,
    `<stem>_aggregates.csv` receives one row with the totals, and `<stem>_config.yaml`
    receives the configuration.

    Args:
        report (:class:`.SimulationReport`): Report.
        path (str): Path to the file.
        format (str, optional): `"json"` or `"csv"`. Defaults to `"json"`.

    Returns:
        list[str]: Paths of the written files.
    """
    if format == "json":
        write_json(report_to_dict(report), path)
        return [path]
    elif format == "csv":
        stem = _stem(path)
        paths = [
            path,
            f"{stem}_periods.csv",
            f"{stem}_aggregates.csv",
            f"{stem}_config.yaml",
        ]
        totals = pd.DataFrame(
            [{"seed": report.seed, "strategy": report.strategy, **report.totals}]
        )
        try:
            report.records.to_csv(paths[0], index=False)
            report.periods.to_csv(paths[1], index=False)
            totals.to_csv(paths[2], index=False)
        except OSError as e:
            raise OSError(f'Could not write report "{path}": {e}') from e
        dump_config(report.config, paths[3])
        return paths
    else:
        raise ValidationError(
            f'Unknown report format "{format}". Choose from {", ".join(FORMATS)}.'
        )


def load_report(path):
    """Load a report written in JSON format.

    Args:
        path (str): Path to the file.

    Returns:
        :class:`.SimulationReport`: Report.
    """
    return report_from_dict(_read_json(path, "report"))


def save_checkpoint(state, path):
    """Save the state of a simulation, so that it can later be continued exactly.

    Args:
        state (:class:`.MarketState`): State.
        path (str): Path to the file.
    """
    write_json(
        {
            "format_version": CHECKPOINT_VERSION,
            "t": state.t,
            "prosumers": state.ids,
            "loss": state.loss,
            "agents": [snapshot(state.agents[i]) for i in range(len(state))],
        },
        path,
    )


def load_checkpoint(path):
    """Load the state of a simulation saved with :func:`.save_checkpoint`.

    Args:
        path (str): Path to the file.

    Returns:
        :class:`.MarketState`: State.
    """
    d = _read_json(path, "checkpoint")
    if d.get("format_version") != CHECKPOINT_VERSION:
        raise ValidationError(
            f"Unsupported checkpoint format version {d.get('format_version')}; "
            f"expected {CHECKPOINT_VERSION}."
        )
    try:
        agents = [restore(a) for a in d["agents"]]
        ids, t = d["prosumers"], d["t"]
        loss = np.array(d["loss"], dtype=np.float64).reshape(len(ids), len(ids))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f'Malformed checkpoint "{path}": {e!r}.') from e
    if [a.seller_id for a in agents] != list(range(len(ids))):
        raise ValidationError(f'Checkpoint "{path}" lacks agents for some prosumers.')
    if len({a.grid for a in agents}) != 1:
        raise ValidationError(f'Agents in checkpoint "{path}" use different grids.')
    profiles = [a.profile for a in agents]
    return MarketState(ids, profiles, loss, {a.seller_id: a for a in agents}, t=t)
