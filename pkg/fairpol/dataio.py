"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Datasets and semi-synthetic generators.

This module holds the observational dataset type (s, x, a, y), its CSV
format, bootstrap resampling and the two benchmark generators.

Key features:
- Load and save datasets as `s,x0,...,x{d-1},a,y` CSV files
- Resample rows with replacement
- NYC-schools-like generator with access to the true structural mean
- IHDP-like generator driven by two surrogate regressions fit to a source file
- Ground-truth sidecar files for generated data

Usage:
- Use `load_dataset()` / `save_dataset()` for CSV files.
- Use `generate_nyc()` to draw a dataset together with its `GroundTruth`.
- Use `counterfactual_mean_outcome()` to evaluate a policy's actions exactly.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ContractError, DatasetParseError, GenerationError
from .nnet import TrainConfig, fit_regression, net_forward, net_init, stack_inputs

DATA_DIR = Path(__file__).parent / "data"
IHDP_STANDIN_PATH = DATA_DIR / "ihdp_standin.csv"

# NYC generator layout: three structural covariates plus the exam rate E,
# which is exposed to learners as the last covariate column.
NYC_COVARIATES = ("advanced_placement", "calculus", "counselors")
NYC_COLUMNS = NYC_COVARIATES + ("exam_rate",)
N_STRUCT = len(NYC_COVARIATES)
# beta multiplies [S, X, SX, A, XA, SA, SAX]; gamma multiplies [X, A, AX].
BETA_SIZE = 1 + 3 * N_STRUCT + 1 + N_STRUCT + 1 + N_STRUCT
GAMMA_SIZE = N_STRUCT + 1 + N_STRUCT
BETA_ACTION_START = 1 + 2 * N_STRUCT
GAMMA_ACTION_START = N_STRUCT
EXAM_RATE_WEIGHT = 20.0


@dataclass(frozen=True)
class Sample:
    s: int
    x: tuple
    a: float
    y: float

    def __post_init__(self):
        if self.s not in (0, 1):
            raise ContractError(f"s must be 0 or 1, got {self.s}")
        if not np.all(np.isfinite([self.a, self.y, *self.x])):
            raise ContractError("sample fields must be finite")


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Ordered observational records from the baseline-policy regime.

    Columns are stored as read-only numpy arrays: s (n,), X (n, d), a (n,), y (n,).
    """
    s: np.ndarray
    X: np.ndarray
    a: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s).astype(int)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        a = np.asarray(self.a, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        n = s.shape[0]
        if X.shape[0] != n or a.shape[0] != n or y.shape[0] != n:
            raise ContractError("dataset columns have different lengths")
        if not np.isin(s, (0, 1)).all():
            raise ContractError("s must be 0 or 1")
        if not (np.isfinite(X).all() and np.isfinite(a).all() and np.isfinite(y).all()):
            raise ContractError("dataset values must be finite")
        for grp in (0, 1):
            if not (s == grp).any():
                raise ContractError(f"dataset has no rows with s={grp}")
        for name, arr in (("s", s), ("X", X), ("a", a), ("y", y)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return int(self.s.shape[0])

    @property
    def d(self):
        return int(self.X.shape[1])

    @property
    def group_counts(self):
        return {grp: int((self.s == grp).sum()) for grp in (0, 1)}

    @property
    def samples(self):
        return [Sample(int(s), tuple(float(v) for v in x), float(a), float(y))
                for s, x, a, y in zip(self.s, self.X, self.a, self.y)]

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        if not samples:
            raise ContractError("no samples")
        d = len(samples[0].x)
        if any(len(smp.x) != d for smp in samples):
            raise ContractError("samples have different covariate lengths")
        return cls(s=[smp.s for smp in samples], X=[list(smp.x) for smp in samples],
                   a=[smp.a for smp in samples], y=[smp.y for smp in samples])

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.s[idx], self.X[idx], self.a[idx], self.y[idx])

    def columns(self):
        return ["s"] + [f"x{j}" for j in range(self.d)] + ["a", "y"]

    def to_frame(self):
        frame = pd.DataFrame(self.X, columns=[f"x{j}" for j in range(self.d)])
        frame.insert(0, "s", self.s)
        frame["a"] = self.a
        frame["y"] = self.y
        return frame

    def equals(self, other):
        return (isinstance(other, Dataset)
                and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in ("s", "X", "a", "y")))


# ---------------------------------------------------------------------------
# CSV files
# ---------------------------------------------------------------------------

def expected_header(d):
    return ["s"] + [f"x{j}" for j in range(d)] + ["a", "y"]


def load_dataset(path):
    """
    Load a dataset CSV with header `s,x0,...,x{d-1},a,y`.

    Args:
        path (str): CSV file path.

    Returns:
        Dataset: Rows in file order; d is inferred from the header.

    Raises:
        DatasetParseError: Malformed header, non-numeric cell or s outside
            {0, 1}; the error names the offending line.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as e:
        raise DatasetParseError(f"cannot parse {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DatasetParseError(f"{path} is empty", line=1) from e

    header = [c.strip() for c in frame.columns]
    d = len(header) - 3
    if d < 1 or header != expected_header(d):
        raise DatasetParseError(f"malformed header {header}", line=1)
    frame.columns = header

    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = numeric.isna() | ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.to_numpy().any():
        row = int(np.argmax(bad.to_numpy().any(axis=1)))
        col = header[int(np.argmax(bad.to_numpy()[row]))]
        raise DatasetParseError(f"non-numeric value in column '{col}'", line=row + 2)

    s = numeric["s"].to_numpy(dtype=float)
    invalid = ~np.isin(s, (0.0, 1.0))
    if invalid.any():
        row = int(np.argmax(invalid))
        raise DatasetParseError(f"s must be 0 or 1, got {frame['s'].iloc[row]}", line=row + 2)

    try:
        dataset = Dataset(s=s.astype(int),
                          X=numeric[[f"x{j}" for j in range(d)]].to_numpy(dtype=float),
                          a=numeric["a"].to_numpy(dtype=float),
                          y=numeric["y"].to_numpy(dtype=float))
    except ContractError as e:
        raise DatasetParseError(f"{path}: {e}") from e
    logging.info(f"Loaded {len(dataset)} rows (d={d}) from {path}")
    return dataset


def save_dataset(dataset, path):
    dataset.to_frame().to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logging.info(f"Saved {len(dataset)} rows to {path}")


def load_ihdp_standin():
    """The bundled 200-row IHDP-like source used when no source file is given."""
    return load_dataset(IHDP_STANDIN_PATH)


def bootstrap(dataset, m, seed):
    """
    Resample m rows uniformly with replacement.

    Args:
        dataset (Dataset): Source rows.
        m (int): Number of rows to draw (>= 1).
        seed (int): RNG seed.

    Returns:
        Dataset: The resampled rows.
    """
    if int(m) < 1:
        raise ContractError(f"m must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(dataset), size=int(m))
    return dataset.subset(idx)


# ---------------------------------------------------------------------------
# NYC-like generator
# ---------------------------------------------------------------------------

def _as_tuple(values):
    return None if values is None else tuple(float(v) for v in values)


@dataclass(frozen=True)
class GeneratorSpec:
    """
    Generator settings. Weight and coefficient vectors left as None are drawn
    from the seed: w_sx, w_x ~ U(0, 1); beta, gamma ~ N(0, 1) with +1 added
    to every coefficient of a term involving the action.
    """
    seed: int = 0
    n: int = 20000
    w_sx: tuple = None
    w_x: tuple = None
    beta: tuple = None
    gamma: tuple = None
    action_noise_mean: float = 0.5
    action_noise_sd: float = 0.4
    outcome_noise_mean: float = 1.0
    outcome_noise_sd: float = 1.0
    exam_rates: tuple = None
    group_rate: float = 0.3
    counselor_scale: float = 1.5
    surrogate_hidden: int = 64
    surrogate_epochs: int = 300
    surrogate_lr: float = 0.01

    def __post_init__(self):
        for name in ("w_sx", "w_x", "beta", "gamma", "exam_rates"):
            object.__setattr__(self, name, _as_tuple(getattr(self, name)))
        if int(self.n) < 1:
            raise ContractError(f"n must be >= 1, got {self.n}")
        if not self.action_noise_sd > 0:
            raise ContractError("action_noise_sd must be > 0")
        if self.outcome_noise_sd < 0:
            raise ContractError("outcome_noise_sd must be >= 0")
        if not 0.0 < self.group_rate < 1.0:
            raise ContractError("group_rate must lie in (0, 1)")
        for name, size in (("w_sx", N_STRUCT), ("w_x", N_STRUCT), ("beta", BETA_SIZE), ("gamma", GAMMA_SIZE)):
            values = getattr(self, name)
            if values is not None and len(values) != size:
                raise ContractError(f"{name} must have length {size}, got {len(values)}")
        if self.exam_rates is not None and len(self.exam_rates) == 0:
            raise ContractError("exam_rates must not be empty")


@dataclass(frozen=True)
class GroundTruth:
    """Frozen generator settings plus every realized coefficient draw."""
    spec: GeneratorSpec
    w_sx: tuple
    w_x: tuple
    beta: tuple
    gamma: tuple
    cov_probs: tuple
    raw_action_min: float
    raw_action_max: float

    def _split(self, s, X, a):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(NYC_COLUMNS):
            raise ContractError(f"expected {len(NYC_COLUMNS)} covariates (incl. exam rate), got {X.shape[1]}")
        n = X.shape[0]
        s = np.broadcast_to(np.asarray(s, dtype=float), (n,))
        a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
        return s, X[:, :N_STRUCT], X[:, N_STRUCT], a

    def structural_mean(self, s, X, a):
        """E[Y | s, x, a] under the realized coefficients (noise mean included)."""
        s, x, exam, a = self._split(s, X, a)
        beta = np.asarray(self.beta)
        gamma = np.asarray(self.gamma)
        sx = s[:, None] * x
        beta_terms = np.column_stack([s, x, sx, a, x * a[:, None], s * a, sx * a[:, None]])
        gamma_terms = np.column_stack([x, a, x * a[:, None]])
        return (EXAM_RATE_WEIGHT * exam + beta_terms @ beta + gamma_terms @ gamma
                + self.spec.outcome_noise_mean)

    def g_component(self, s, X, a):
        """True S-moderated action component: s * a * (beta_SA + beta_SAX . x)."""
        s, x, _, a = self._split(s, X, a)
        beta = np.asarray(self.beta)
        beta_sa = beta[BETA_ACTION_START + 1 + N_STRUCT]
        beta_sax = beta[BETA_ACTION_START + 2 + N_STRUCT:]
        return s * a * (beta_sa + x @ beta_sax)

    def baseline_action_mean(self, s, X):
        """Noise-mean action of the generating policy on the rescaled [0, 1] scale."""
        s, x, _, _ = self._split(s, X, 0.0)
        raw = _raw_action(np.asarray(self.w_sx), np.asarray(self.w_x), s, x) + self.spec.action_noise_mean
        return (raw - self.raw_action_min) / (self.raw_action_max - self.raw_action_min)

    def to_dict(self):
        return {"generator": "nyc", **asdict(self)}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data.pop("generator", None)
        spec = GeneratorSpec(**data.pop("spec"))
        return cls(spec=spec, **{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


def _raw_action(w_sx, w_x, s, x):
    return (((s[:, None] * x) @ w_sx) ** 2) + np.maximum(0.0, x @ w_x)


def _draw_coefficients(spec, rng):
    w_sx = np.asarray(spec.w_sx) if spec.w_sx is not None else rng.uniform(0.0, 1.0, N_STRUCT)
    w_x = np.asarray(spec.w_x) if spec.w_x is not None else rng.uniform(0.0, 1.0, N_STRUCT)
    if spec.beta is not None:
        beta = np.asarray(spec.beta)
    else:
        beta = rng.normal(0.0, 1.0, BETA_SIZE)
        beta[BETA_ACTION_START:] += 1.0
    if spec.gamma is not None:
        gamma = np.asarray(spec.gamma)
    else:
        gamma = rng.normal(0.0, 1.0, GAMMA_SIZE)
        gamma[GAMMA_ACTION_START:] += 1.0
    return w_sx, w_x, beta, gamma


def generate_nyc(spec):
    """
    Draw an NYC-schools-like dataset.

    Covariates: two Bernoulli course offerings (probabilities drawn per seed,
    raised by 0.1 for s=1), a half-normal counselor count and the exam rate
    E ~ U(0, 1) (or bootstrapped from spec.exam_rates). Actions follow
    A = (w_sx . SX)^2 + max(0, w_x . X) + N(0.5, 0.4), rescaled to [0, 1].
    Outcomes follow Y = 20E + beta . [S, X, SX, A, XA, SA, SAX]
    + gamma . [X, A, AX] + N(1, sigma).

    Args:
        spec (GeneratorSpec): Generator settings.

    Returns:
        tuple: (Dataset, GroundTruth)
    """
    rng = np.random.default_rng(spec.seed)
    n = int(spec.n)
    w_sx, w_x, beta, gamma = _draw_coefficients(spec, rng)
    cov_probs = rng.uniform(0.2, 0.8, 2)

    s = rng.binomial(1, spec.group_rate, n)
    x_ap = rng.binomial(1, np.clip(cov_probs[0] + 0.1 * s, 0.0, 1.0))
    x_calc = rng.binomial(1, np.clip(cov_probs[1] + 0.1 * s, 0.0, 1.0))
    x_couns = spec.counselor_scale * np.abs(rng.normal(0.0, 1.0, n))
    if spec.exam_rates is not None:
        exam = np.asarray(spec.exam_rates)[rng.integers(0, len(spec.exam_rates), n)]
    else:
        exam = rng.uniform(0.0, 1.0, n)
    x = np.column_stack([x_ap, x_calc, x_couns]).astype(float)

    raw = _raw_action(w_sx, w_x, s.astype(float), x) + rng.normal(spec.action_noise_mean, spec.action_noise_sd, n)
    lo, hi = float(raw.min()), float(raw.max())
    if not hi > lo:
        raise GenerationError("degenerate action rescale: all raw actions are equal")
    a = (raw - lo) / (hi - lo)

    truth = GroundTruth(spec=spec, w_sx=tuple(w_sx.tolist()), w_x=tuple(w_x.tolist()),
                        beta=tuple(beta.tolist()), gamma=tuple(gamma.tolist()),
                        cov_probs=tuple(cov_probs.tolist()), raw_action_min=lo, raw_action_max=hi)
    X = np.column_stack([x, exam])
    noise = rng.normal(0.0, 1.0, n) * spec.outcome_noise_sd
    y = truth.structural_mean(s, X, a) + noise

    try:
        dataset = Dataset(s=s, X=X, a=a, y=y)
    except ContractError as e:
        raise GenerationError(f"generated data is invalid: {e}") from e
    logging.info(f"Generated NYC-like dataset: n={n}, seed={spec.seed}, groups={dataset.group_counts}")
    return dataset, truth


def counterfactual_mean_outcome(gt, s, x, a):
    """
    Structural mean of Y at (s, x, a) under the generator's coefficients.

    Args:
        gt (GroundTruth): Truth returned by `generate_nyc`.
        s: Group label(s).
        x: Covariate vector (d,) or rows (n, d), exam rate last.
        a: Action(s).

    Returns:
        float or np.ndarray: The mean outcome(s).
    """
    single = np.ndim(x) == 1
    out = gt.structural_mean(s, x, a)
    return float(out[0]) if single else out


def save_ground_truth(gt, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(gt.to_dict(), f, indent=2, sort_keys=True)
    logging.info(f"Saved ground truth to {path}")


def load_ground_truth(path):
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if data.get("generator") != "nyc":
        return None
    return GroundTruth.from_dict(data)


def ground_truth_path(dataset_path):
    return Path(str(dataset_path) + ".truth.json")


# ---------------------------------------------------------------------------
# IHDP-like surrogate generator
# ---------------------------------------------------------------------------

@dataclass
class IHDPSurrogates:
    """The two black-box models behind the IHDP-like generator."""
    action_net: object
    outcome_net: object
    action_noise_sd: float
    outcome_noise_sd: float
    loss_traces: dict = field(default_factory=dict)

    def predict_action(self, s, X):
        return net_forward(self.action_net, stack_inputs(s, X))[:, 0]

    def predict_outcome(self, a, s, X):
        return net_forward(self.outcome_net, stack_inputs(a, s, X))[:, 0]


def fit_ihdp_surrogates(spec, source):
    """
    Fit the action model (s, x) -> a and the outcome model (a, s, x) -> y.

    The generator noise of each surrogate is its residual standard deviation
    on the source rows.
    """
    if source is None or len(source) == 0:
        raise GenerationError("IHDP surrogate needs a non-empty source dataset")
    cfg = TrainConfig(epochs=spec.surrogate_epochs, lr=spec.surrogate_lr,
                      hidden=spec.surrogate_hidden, depth=1, seed=spec.seed)
    action_net = net_init(spec.seed, cfg.widths(1 + source.d))
    action_net, a_trace = fit_regression(action_net, stack_inputs(source.s, source.X), source.a, cfg)
    outcome_net = net_init(spec.seed + 1, cfg.widths(2 + source.d))
    outcome_net, y_trace = fit_regression(outcome_net, stack_inputs(source.a, source.s, source.X), source.y, cfg)

    surrogates = IHDPSurrogates(action_net, outcome_net, 0.0, 0.0, {"action": a_trace, "outcome": y_trace})
    surrogates.action_noise_sd = float(np.std(source.a - surrogates.predict_action(source.s, source.X)))
    surrogates.outcome_noise_sd = float(np.std(source.y - surrogates.predict_outcome(source.a, source.s, source.X)))
    return surrogates


def generate_ihdp_surrogate(spec, source):
    """
    Resample (s, x) from source to spec.n rows and regenerate a and y.

    Args:
        spec (GeneratorSpec): Seed, row count and surrogate training settings.
        source (Dataset): Original (s, x, a, y) records.

    Returns:
        Dataset: The semi-synthetic dataset.
    """
    surrogates = fit_ihdp_surrogates(spec, source)
    rng = np.random.default_rng(spec.seed)
    idx = rng.integers(0, len(source), size=int(spec.n))
    s, X = source.s[idx], source.X[idx]
    a = surrogates.predict_action(s, X) + rng.normal(0.0, 1.0, idx.size) * surrogates.action_noise_sd
    y = surrogates.predict_outcome(a, s, X) + rng.normal(0.0, 1.0, idx.size) * surrogates.outcome_noise_sd
    try:
        dataset = Dataset(s=s, X=X, a=a, y=y)
    except ContractError as e:
        raise GenerationError(f"generated data is invalid: {e}") from e
    logging.info(f"Generated IHDP-like dataset: n={len(dataset)}, seed={spec.seed}")
    return dataset
