from dataclasses import dataclass

import lab as B
import numpy as np
import pandas as pd

from .util import ValidationError

__all__ = [
    "COLUMNS",
    "TraceSet",
    "SynthParams",
    "load_traces",
    "write_traces",
    "synth_traces",
    "classify_prosumers",
]

#: Header of a trace file.
COLUMNS = ["prosumer_id", "period", "consumption_kwh", "production_kwh"]


class TraceSet:
    """Consumption and production of every prosumer in every period.

    Args:
        ids (list[str]): Prosumer ids in registration order.
        consumption (matrix): Consumption in kWh with prosumers as rows and periods
            as columns.
        production (matrix): Production in kWh of the same shape.
    """

    def __init__(self, ids, consumption, production):
        self.ids = [str(i) for i in ids]
        self.consumption = np.array(consumption, dtype=np.float64, ndmin=2)
        self.production = np.array(production, dtype=np.float64, ndmin=2)
        self._validate()

    def _validate(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("Prosumer ids must be unique.")
        shape = (len(self.ids), B.shape(self.consumption)[1])
        for name in ["consumption", "production"]:
            values = getattr(self, name)
            if B.shape(values) != shape:
                raise ValidationError(
                    f"{name.capitalize()} has shape {B.shape(values)}, "
                    f"but {shape} was expected."
                )
            if B.any(values < 0):
                i, t = np.argwhere(values < 0)[0]
                raise ValidationError(
                    f"Negative {name} {values[i, t]} for prosumer "
                    f'"{self.ids[i]}" in period {t}.'
                )

    @property
    def horizon(self):
        """int: Number of periods."""
        return B.shape(self.consumption)[1]

    def __len__(self):
        return len(self.ids)

    def to_frame(self):
        """Convert to a table in the trace file layout.

        Returns:
            :class:`pandas.DataFrame`: Table with columns :data:`.COLUMNS`.
        """
        n, h = len(self), self.horizon
        return pd.DataFrame(
            {
                "prosumer_id": np.repeat(self.ids, h),
                "period": np.tile(np.arange(h), n),
                "consumption_kwh": self.consumption.reshape(-1),
                "production_kwh": self.production.reshape(-1),
            },
            columns=COLUMNS,
        )


def load_traces(path):
    """Load and validate a trace file.

    The file is comma separated with header
    `prosumer_id,period,consumption_kwh,production_kwh`, uses a decimal point, and has
    no thousands separators. Prosumers are registered in the order in which they first
    appear. Every prosumer must cover every period `0, ..., H - 1`.

    Args:
        path (str): Path to the file.

    Returns:
        :class:`.TraceSet`: Traces.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ValidationError(f'Trace file "{path}" has no records.')
    except pd.errors.ParserError as e:
        raise ValidationError(f'Malformed trace file "{path}": {e}')
    except UnicodeDecodeError:
        raise ValidationError(
            f'Line {_undecodable_line(path)} of trace file "{path}": not valid UTF-8.'
        )
    except OSError as e:
        raise OSError(f'Could not read trace file "{path}": {e}') from e

    if list(frame.columns) != COLUMNS:
        raise ValidationError(
            f'Trace file "{path}" has header {",".join(frame.columns)}, '
            f'but {",".join(COLUMNS)} was expected.'
        )
    if len(frame) == 0:
        raise ValidationError(f'Trace file "{path}" has no records.')

    # Line numbers count the header as line one.
    lines = np.arange(len(frame)) + 2
    period = pd.to_numeric(frame["period"], errors="coerce")
    bad = period.isna() | (period < 0) | (period != np.floor(period))
    _reject(bad, lines, path, "period must be a non-negative integer")
    for column in ["consumption_kwh", "production_kwh"]:
        values = pd.to_numeric(frame[column], errors="coerce")
        _reject(values.isna(), lines, path, f"{column} is not a number")
        _reject(values < 0, lines, path, f"{column} is negative")
        frame[column] = values
    _reject(frame["prosumer_id"] == "", lines, path, "prosumer_id is empty")
    frame["period"] = period.astype(int)

    duplicated = frame.duplicated(["prosumer_id", "period"])
    _reject(duplicated, lines, path, "duplicate (prosumer_id, period)")

    ids = list(pd.unique(frame["prosumer_id"]))
    horizon = int(frame["period"].max()) + 1
    consumption = frame.pivot(
        index="prosumer_id", columns="period", values="consumption_kwh"
    ).reindex(index=ids, columns=range(horizon))
    missing = np.argwhere(consumption.isna().to_numpy())
    if len(missing) > 0:
        pairs = ", ".join(f"({ids[i]}, {t})" for i, t in missing)
        raise ValidationError(
            f'Trace file "{path}" does not cover every period for every prosumer. '
            f"Missing (prosumer_id, period) pairs: {pairs}."
        )
    production = frame.pivot(
        index="prosumer_id", columns="period", values="production_kwh"
    ).reindex(index=ids, columns=range(horizon))
    return TraceSet(ids, consumption.to_numpy(), production.to_numpy())


def _undecodable_line(path):
    with open(path, "rb") as f:
        for line, raw in enumerate(f, 1):
            try:
                raw.decode("utf-8")
            except UnicodeDecodeError:
                return line


def _reject(mask, lines, path, reason):
    mask = np.asarray(mask, dtype=bool)
    if B.any(mask):
        line = lines[np.argmax(mask)]
        raise ValidationError(f'Line {line} of trace file "{path}": {reason}.')


def write_traces(traces, path):
    """Write traces in the layout read by :func:`.load_traces`.

    Args:
        traces (:class:`.TraceSet`): Traces.
        path (str): Path to the file.
    """
    try:
        traces.to_frame().to_csv(path, index=False)
    except OSError as e:
        raise OSError(f'Could not write trace file "{path}": {e}') from e


@dataclass(frozen=True)
class SynthParams:
    """Parameters of the synthetic trace generator. Energies are daily kWh.

    Args:
        production_base (float, optional): Mean daily production of a seller, which
            roughly corresponds to a 4 kW rooftop installation.
        production_amplitude (float, optional): Relative seasonal amplitude.
        production_phase (float, optional): Day at which the seasonal sinusoid crosses
            its mean upwards. The peak is a quarter year later.
        production_noise (float, optional): Standard deviation of the log-normal
            multiplicative noise on production.
        consumption_base (float, optional): Mean daily consumption of a consumer.
        seller_consumption_base (float, optional): Mean daily consumption of a seller.
        consumption_amplitude (float, optional): Relative seasonal amplitude of
            consumption, peaking together with production.
        consumption_noise (float, optional): Standard deviation of the log-normal
            multiplicative noise on consumption.
        periods_per_day (int, optional): Number of periods per day.
    """

    production_base: float = 16.0
    production_amplitude: float = 0.4
    production_phase: float = 91.0
    production_noise: float = 0.2
    consumption_base: float = 12.0
    seller_consumption_base: float = 10.0
    consumption_amplitude: float = 0.15
    consumption_noise: float = 0.15
    periods_per_day: int = 1


def _seasonal(days, base, amplitude, phase):
    return base * (1 + amplitude * np.sin(2 * np.pi * (days - phase) / 365))


def _diurnal(periods_per_day):
    # Fractions of the daily energy per period: production follows daylight from 6:00
    # to 18:00, and consumption has a flat base with an evening peak.
    hours = (np.arange(periods_per_day) + 0.5) * 24 / periods_per_day
    production = np.maximum(np.sin(np.pi * (hours - 6) / 12), 0)
    if B.sum(production) == 0:
        production = np.ones(periods_per_day)
    consumption = 1 + np.maximum(np.sin(np.pi * (hours - 16) / 8), 0)
    return production / B.sum(production), consumption / B.sum(consumption)


def synth_traces(n_buyers, n_sellers, horizon, rng, params=SynthParams()):
    """Generate synthetic traces.

    Consumers have no production and are therefore always buyers. Sellers have a
    rooftop installation whose daily production follows a seasonal sinusoid with
    multiplicative noise, so they may become buyers when production is low.

    Args:
        n_buyers (int): Number of consumers without production.
        n_sellers (int): Number of prosumers with production.
        horizon (int): Number of periods.
        rng (:class:`numpy.random.Generator`): Random number generator.
        params (:class:`.SynthParams`, optional): Generator parameters.

    Returns:
        :class:`.TraceSet`: Traces with ids `b000, ...` followed by `s000, ...`.
    """
    if n_buyers < 0 or n_sellers < 0 or horizon < 1:
        raise ValidationError("Counts must be non-negative and the horizon positive.")
    n = n_buyers + n_sellers
    t = np.arange(horizon)
    days = t // params.periods_per_day
    share_production, share_consumption = _diurnal(params.periods_per_day)
    slot = t % params.periods_per_day

    base = np.array(
        [params.consumption_base] * n_buyers
        + [params.seller_consumption_base] * n_sellers
    )
    consumption = _seasonal(
        days[None, :],
        base[:, None],
        params.consumption_amplitude,
        params.production_phase,
    ) * share_consumption[slot][None, :]
    consumption *= np.exp(params.consumption_noise * rng.standard_normal((n, horizon)))

    production = np.zeros((n, horizon))
    production[n_buyers:] = _seasonal(
        days[None, :],
        params.production_base,
        params.production_amplitude,
        params.production_phase,
    ) * share_production[slot][None, :]
    production[n_buyers:] *= np.exp(
        params.production_noise * rng.standard_normal((n_sellers, horizon))
    )

    ids = [f"b{i:03d}" for i in range(n_buyers)]
    ids += [f"s{i:03d}" for i in range(n_sellers)]
    return TraceSet(ids, consumption, production)


def classify_prosumers(traces, t):
    """Split prosumers into buyers and sellers by their net load in period `t`.

    Args:
        traces (:class:`.TraceSet`): Traces.
        t (int): Period.

    Returns:
        tuple[list, list]: Buyers as tuples `(index, demand)` and sellers as tuples
            `(index, surplus)`, where `index` is the registration index. Prosumers in
            balance are in neither.
    """
    if not 0 <= t < traces.horizon:
        raise ValidationError(
            f"Period {t} is not covered by the traces, which have horizon "
            f"{traces.horizon}."
        )
    buyers, sellers = [], []
    for i, prosumer in enumerate(traces.ids):
        consumption = traces.consumption[i, t]
        production = traces.production[i, t]
        if np.isnan(consumption) or np.isnan(production):
            raise ValidationError(
                f'Missing trace entry for prosumer "{prosumer}" in period {t}.'
            )
        net = consumption - production
        if net > 0:
            buyers.append((i, float(net)))
        elif net < 0:
            sellers.append((i, float(-net)))
    return buyers, sellers
