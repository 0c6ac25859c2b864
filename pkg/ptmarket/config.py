from dataclasses import asdict, dataclass, fields, replace
from typing import Tuple, Union

import yaml
from plum import Dispatcher

from .debate import DebateParams
from .market import ProfileRanges
from .pqr import PQRParams, PriceGrid
from .traces import SynthParams
from .util import ValidationError, check_range

__all__ = [
    "STRATEGIES",
    "SimulationConfig",
    "load_config",
    "config_from_dict",
    "dump_config",
]

_dispatch = Dispatcher()

#: Allocation and pricing strategies.
STRATEGIES = ("debate_pqr", "rule")

_RANGES = (
    "losses",
    "k_range",
    "zeta_plus_range",
    "zeta_minus_range",
    "buyer_ref_range",
    "seller_price_range",
)


@dataclass(frozen=True)
class SimulationConfig:
    """Configuration of a simulation. All fields are flat and named as in the
    configuration file.

    Args:
        horizon (int): Number of trading periods.
        periods_per_day (int): Trading periods per day.
        strategy (str): Either `"debate_pqr"` or `"rule"`.
        seed (int): Master seed.
        n_buyers (int): Consumers without production, for synthetic traces.
        n_sellers (int): Prosumers with production, for synthetic traces.
        pop_size (int): DEbATE population size.
        g_max (int): DEbATE generations.
        cr (float): DEbATE crossover probability.
        f (float): DEbATE differential weight.
        alpha (float): PQR learning rate.
        gamma (float): PQR discount factor.
        delta (float): PQR price step.
        epsilon (float): PQR initial exploration probability.
        epsilon_decay (float): PQR exploration decay per period.
        rho_gb (float): Grid buying price.
        rho_gs (float): Grid selling price.
        losses (tuple[float]): Loss fractions from which every pair samples once.
        l_max (float): Loss threshold.
        k_range (tuple[float, float]): Range of both loss-aversion parameters.
        zeta_plus_range (tuple[float, float]): Range of the gain curvature.
        zeta_minus_range (tuple[float, float]): Range of the loss curvature.
        buyer_ref_range (tuple[float, float]): Range of the reference prices of all
            prosumers.
        seller_price_range (tuple[float, float]): Range of initial seller prices.
        production_base (float): See :class:`.SynthParams`.
        production_amplitude (float): See :class:`.SynthParams`.
        production_phase (float): See :class:`.SynthParams`.
        production_noise (float): See :class:`.SynthParams`.
        consumption_base (float): See :class:`.SynthParams`.
        seller_consumption_base (float): See :class:`.SynthParams`.
        consumption_amplitude (float): See :class:`.SynthParams`.
        consumption_noise (float): See :class:`.SynthParams`.
    """

    horizon: int = 365
    periods_per_day: int = 1
    strategy: str = "debate_pqr"
    seed: int = 0
    n_buyers: int = 20
    n_sellers: int = 20
    pop_size: int = 20
    g_max: int = 10_000
    cr: float = 0.9
    f: float = 0.5
    alpha: float = 1e-4
    gamma: float = 0.9
    delta: float = 0.001
    epsilon: float = 1.0
    epsilon_decay: float = 0.965
    rho_gb: float = 0.06
    rho_gs: float = 0.12
    losses: Tuple[float, ...] = (0.01, 0.02, 0.03, 0.04)
    l_max: float = 0.025
    k_range: Tuple[float, float] = (2.10, 2.61)
    zeta_plus_range: Tuple[float, float] = (0.60, 0.88)
    zeta_minus_range: Tuple[float, float] = (0.52, 1.0)
    buyer_ref_range: Tuple[float, float] = (0.06, 0.10)
    seller_price_range: Tuple[float, float] = (0.09, 0.12)
    production_base: float = 16.0
    production_amplitude: float = 0.4
    production_phase: float = 91.0
    production_noise: float = 0.2
    consumption_base: float = 12.0
    seller_consumption_base: float = 10.0
    consumption_amplitude: float = 0.15
    consumption_noise: float = 0.15

    def __post_init__(self):
        for name in _RANGES:
            object.__setattr__(self, name, _parse_range(getattr(self, name)))
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f'Unknown strategy "{self.strategy}". '
                f'Choose from {", ".join(STRATEGIES)}.'
            )
        if self.horizon < 1:
            raise ValidationError(f"Horizon must be at least one, got {self.horizon}.")
        if self.periods_per_day < 1:
            raise ValidationError("There must be at least one period per day.")
        if self.n_buyers < 0 or self.n_sellers < 0:
            raise ValidationError("Prosumer counts must be non-negative.")
        if len(self.losses) == 0:
            raise ValidationError("At least one loss fraction is required.")
        for loss in self.losses:
            if not 0 <= loss < 1:
                raise ValidationError(f"Loss fraction {loss} not in [0, 1).")
        if not 0 < self.l_max <= 1:
            raise ValidationError(f"Loss threshold {self.l_max} not in (0, 1].")
        check_range("k_range", self.k_range, 0)
        check_range("zeta_plus_range", self.zeta_plus_range, 0, 1)
        check_range("zeta_minus_range", self.zeta_minus_range, 0, 1)
        if min(self.zeta_plus_range + self.zeta_minus_range) <= 0:
            raise ValidationError("Curvature parameters must be positive.")
        # The constructors validate the remaining fields.
        self.debate_params
        self.pqr_params
        grid = self.price_grid
        check_range("buyer_ref_range", self.buyer_ref_range, grid.rho_gb, grid.rho_gs)
        check_range(
            "seller_price_range", self.seller_price_range, grid.rho_gb, grid.rho_gs
        )

    @property
    def debate_params(self):
        """:class:`.DebateParams`: Parameters of DEbATE."""
        return DebateParams(
            pop_size=self.pop_size,
            g_max=self.g_max,
            cr=self.cr,
            f=self.f,
            seed=self.seed,
        )

    @property
    def pqr_params(self):
        """:class:`.PQRParams`: Parameters of PQR."""
        return PQRParams(
            alpha=self.alpha,
            gamma=self.gamma,
            delta=self.delta,
            epsilon=self.epsilon,
            epsilon_decay=self.epsilon_decay,
        )

    @property
    def price_grid(self):
        """:class:`.PriceGrid`: Price grid."""
        return PriceGrid(self.rho_gb, self.rho_gs, self.delta)

    @property
    def profile_ranges(self):
        """:class:`.ProfileRanges`: Ranges of the profiles of all prosumers."""
        return ProfileRanges(
            k=self.k_range,
            zeta_plus=self.zeta_plus_range,
            zeta_minus=self.zeta_minus_range,
            ref_price=self.buyer_ref_range,
        )

    @property
    def synth_params(self):
        """:class:`.SynthParams`: Parameters of the synthetic traces."""
        return SynthParams(
            **{
                f.name: getattr(self, f.name)
                for f in fields(SynthParams)
                if f.name != "periods_per_day"
            },
            periods_per_day=self.periods_per_day,
        )

    def to_dict(self):
        """Convert to a dictionary from which :func:`.config_from_dict` recreates the
        configuration.

        Returns:
            dict: Configuration with ranges as lists.
        """
        return {
            k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()
        }

    def override(self, **changes):
        """Copy with some fields changed. Fields set to `None` are left unchanged.

        Returns:
            :class:`.SimulationConfig`: New configuration.
        """
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@_dispatch
def _parse_range(value: Union[list, tuple]):
    return tuple(float(v) for v in value)


@_dispatch
def _parse_range(value: object):
    raise ValidationError(f"Expected a list of numbers, but got {value!r}.")


def config_from_dict(d):
    """Construct a configuration from a dictionary.

    Args:
        d (dict): Configuration. Missing keys take their default value.

    Returns:
        :class:`.SimulationConfig`: Configuration.
    """
    if not isinstance(d, dict):
        raise ValidationError("A configuration must be a mapping of keys to values.")
    known = {f.name: f.type for f in fields(SimulationConfig)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ValidationError(f'Unknown configuration keys: {", ".join(unknown)}.')
    values = {}
    for key, value in d.items():
        is_int = isinstance(value, int) and not isinstance(value, bool)
        if known[key] is int and not is_int:
            raise ValidationError(f'Key "{key}" must be an integer, got {value!r}.')
        if known[key] is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f'Key "{key}" must be a number, got {value!r}.')
            value = float(value)
        values[key] = value
    try:
        return SimulationConfig(**values)
    except (TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(str(e)) from e


def load_config(path):
    """Load a flat YAML configuration file.

    Args:
        path (str): Path to the file.

    Returns:
        :class:`.SimulationConfig`: Configuration.
    """
    try:
        with open(path) as f:
            d = yaml.safe_load(f)
    except OSError as e:
        raise OSError(f'Could not read configuration "{path}": {e}') from e
    except yaml.YAMLError as e:
        raise ValidationError(f'Configuration "{path}" is not valid YAML: {e}') from e
    return config_from_dict({} if d is None else d)


def dump_config(config, path):
    """Write a configuration in the format read by :func:`.load_config`.

    Args:
        config (:class:`.SimulationConfig`): Configuration.
        path (str): Path to the file.
    """
    try:
        with open(path, "w") as f:
            yaml.safe_dump(config.to_dict(), f, sort_keys=False)
    except OSError as e:
        raise OSError(f'Could not write configuration "{path}": {e}') from e
