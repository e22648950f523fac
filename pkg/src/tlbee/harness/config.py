"""Experiment configuration records and TOML loading."""

import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DomainError
from ..model import JointHyper, build_scale_matrix

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("fixed", "obtl", "flipped")
LOOP_ORDERS = ("prior_outer", "cell_outer")
ESTIMATORS = ("resub", "cv", "loo", "boot", "bee")


@dataclass(frozen=True)
class ExperimentConfig:
    """Synthetic MSE study.

    ``experiment`` selects the sweep: ``"fixed"`` (true-parameter QDA or
    LDA), ``"obtl"`` (trained OBTL rule against the resampling baselines)
    or ``"flipped"`` (source class means swapped; ``mislabeled`` routes
    the source data into the target slot).
    """

    experiment: str = "fixed"
    d: int = 2
    alphas: tuple = (0.1, 0.5, 0.9, 0.95)
    n_s: tuple = (200,)
    n_t: tuple = (20,)
    tau: float = 0.2
    N_d: int = 500
    N_p: int = 5
    N: int = 1000
    n_test: int = 1000
    n_test_true: int = 100_000
    n_test_per_theta: int = 1000
    classifier: str = "qda"
    estimators: tuple = ()
    seed: int = 0
    threads: int = 1
    output: str = ""
    calib_tol: float = 0.005
    calib_max_iter: int = 50
    loop_order: str = "prior_outer"
    nu: float = 0.0
    kappa: float = 100.0
    k_t: float = 1.0
    k_s: float = 1.0
    source_offset: float = 10.0
    c: float = 0.5
    flip_source: bool = False
    mislabeled: bool = False
    use_control_variate: bool = True
    cv_k: int = 5
    cv_reps: int = 1
    boot_B: int = 100
    record_runtime: bool = False

    def __post_init__(self):
        for name in ("alphas", "n_s", "n_t", "estimators"):
            val = getattr(self, name)
            if isinstance(val, (str, int, float)):
                val = (val,)
            object.__setattr__(self, name, tuple(val))
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.loop_order not in LOOP_ORDERS:
            raise ConfigError(f"loop_order must be one of {LOOP_ORDERS}")
        if self.experiment == "obtl":
            object.__setattr__(self, "classifier", "obtl")
        elif self.classifier not in ("qda", "lda"):
            raise ConfigError("classifier must be 'qda' or 'lda' for fixed-classifier sweeps")
        if self.experiment == "flipped":
            object.__setattr__(self, "flip_source", True)
        for name in ("d", "N_d", "N_p", "n_test", "n_test_true", "n_test_per_theta",
                     "calib_max_iter", "cv_k", "cv_reps", "boot_B", "threads"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if not 0 < self.tau <= 0.5:
            raise ConfigError("tau must lie in (0, 0.5]")
        if any(not abs(a) < 1 for a in self.alphas) or not self.alphas:
            raise ConfigError("alphas must be a non-empty list with |alpha| < 1")
        if any(n < 0 for n in self.n_s) or not self.n_s:
            raise ConfigError("n_s values must be non-negative")
        if any(n < 1 for n in self.n_t) or not self.n_t:
            raise ConfigError("n_t values must be positive")
        if not self.estimators:
            auto = ESTIMATORS if self.experiment == "obtl" else ("bee",)
            object.__setattr__(self, "estimators", auto)
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ConfigError(f"unknown estimators {sorted(bad)}")
        if self.nu == 0.0:
            object.__setattr__(self, "nu", float(self.d + 20))
        if self.nu < 2 * self.d:
            raise ConfigError("nu must be >= 2d")

    def to_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


@dataclass(frozen=True)
class RnaSeqConfig:
    """RNA-seq (or stand-in) alpha sweep.

    Hyperparameters follow the recipe ``kappa_t = n_t``, ``kappa_s = n_s``,
    ``k_t = k_s = 1/nu``; prior means are the averages of the two class
    means of each domain's training data.
    """

    target_csv: str = ""
    source_csv: str = ""
    features: tuple = ()
    n_t: int = 5
    n_s: tuple = (10, 20, 40)
    alphas: tuple = (0.1, 0.3, 0.5, 0.7, 0.8, 0.85, 0.9, 0.95, 0.99)
    replicates: int = 200
    n_perm: int = 10
    nu: float = 30.0
    N: int = 1000
    n_test_per_theta: int = 250
    c: float = 0.5
    use_control_variate: bool = True
    seed: int = 0
    threads: int = 1
    output: str = ""
    record_runtime: bool = False

    def __post_init__(self):
        for name in ("features", "n_s", "alphas"):
            val = getattr(self, name)
            if isinstance(val, (str, int, float)):
                val = (val,)
            object.__setattr__(self, name, tuple(val))
        if not self.target_csv or not self.source_csv:
            raise ConfigError("target_csv and source_csv are required")
        for p in (self.target_csv, self.source_csv):
            if not Path(p).is_file():
                raise ConfigError(f"input file not found: {p}")
        if self.n_t < 1 or self.replicates < 1 or self.n_perm < 1 or self.N < 2:
            raise ConfigError("n_t, replicates, n_perm must be >= 1 and N >= 2")
        if not self.n_s or any(n < 1 for n in self.n_s):
            raise ConfigError("n_s values must be positive")
        if not self.alphas or any(not abs(a) < 1 for a in self.alphas):
            raise ConfigError("alphas must be a non-empty list with |alpha| < 1")

    def to_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


def _from_mapping(cls, data, overrides):
    known = {f.name for f in fields(cls)}
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def read_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def load_experiment_config(path=None, section="experiment", **overrides):
    """Build an :class:`ExperimentConfig` from a TOML table plus overrides."""
    data = read_toml(path).get(section, {}) if path else {}
    return _from_mapping(ExperimentConfig, data, overrides)


def load_rnaseq_config(path=None, section="rnaseq", **overrides):
    """Build an :class:`RnaSeqConfig` from a TOML table plus overrides.

    Relative CSV paths are resolved against the config file's directory.
    """
    data = dict(read_toml(path).get(section, {})) if path else {}
    if path:
        base = Path(path).resolve().parent
        for key in ("target_csv", "source_csv"):
            if key in data and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
    return _from_mapping(RnaSeqConfig, data, overrides)


def hyper_from_mapping(data):
    """Build a :class:`JointHyper` from a plain mapping.

    Keys: ``nu``, ``kappa_t``, ``kappa_s``, ``m_t``, ``m_s`` (a vector
    shared by both classes or a pair of vectors), ``c`` and either the
    blocks ``M_t``, ``M_s``, ``M_ts`` or the scalars ``k_t``, ``k_s`` and
    ``alpha`` giving ``(k_t I, k_s I, alpha sqrt(k_t k_s) I)``.
    """
    data = dict(data)
    allowed = {"nu", "kappa_t", "kappa_s", "m_t", "m_s", "M_t", "M_s", "M_ts",
               "k_t", "k_s", "alpha", "c"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown hyperparameter keys: {sorted(unknown)}")
    missing = {"nu", "kappa_t", "kappa_s", "m_t", "m_s"} - set(data)
    if missing:
        raise ConfigError(f"missing hyperparameter keys: {sorted(missing)}")
    m_t = np.atleast_1d(np.asarray(data["m_t"], dtype=float))
    d = m_t.shape[-1]
    alpha = float(data.get("alpha", float("nan")))
    try:
        if "M_t" in data:
            blocks = {k: np.asarray(data[k], dtype=float) for k in ("M_t", "M_s")}
            blocks["M_ts"] = np.asarray(data.get("M_ts", np.zeros((d, d))), dtype=float)
            blocks = {k: v * np.eye(d) if v.ndim == 0 else v for k, v in blocks.items()}
        else:
            M_t, M_s, M_ts = build_scale_matrix(float(data.get("k_t", 1.0)), float(data.get("k_s", 1.0)),
                                                0.0 if np.isnan(alpha) else alpha, d)
            blocks = {"M_t": M_t, "M_s": M_s, "M_ts": M_ts}
        return JointHyper(nu=data["nu"], kappa_t=data["kappa_t"], kappa_s=data["kappa_s"],
                          m_t=m_t, m_s=np.asarray(data["m_s"], dtype=float), c=float(data.get("c", 0.5)),
                          alpha=alpha, **blocks)
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"invalid hyperparameters: {exc}") from exc


def load_hyper(path, section="hyper"):
    """Read a ``[hyper]`` table from TOML; see :func:`hyper_from_mapping`."""
    data = read_toml(path)
    if section not in data:
        raise ConfigError(f"{path}: missing [{section}] table")
    return hyper_from_mapping(data[section])


__all__ = [
    "ExperimentConfig",
    "RnaSeqConfig",
    "load_experiment_config",
    "load_rnaseq_config",
    "read_toml",
    "hyper_from_mapping",
    "load_hyper",
]
