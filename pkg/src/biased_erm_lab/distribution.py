"""True two-group data distribution and the canonical threshold classifiers.

Group B carries mass ``r`` of the population, group A the rest.  Within each
group the feature is uniform on [0, 1] and the reference classifier labels
x >= theta_g positive, with theta_g = 1 - p so the positive region of each
group has mass exactly p.  True labels flip the reference label independently
with probability eta < 1/2, so the reference pair is Bayes optimal.

Hypotheses are encoded by their deviation masses from the reference pair:
p1_g is the mass of the positive region classified negative, p2_g the mass of
the negative region classified positive.  Thresholds realize exactly the
single-nonzero-parameter deviations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import RangeError

GROUP_A = 0
GROUP_B = 1
_GROUP_CHARS = ("A", "B")

_THETA_TOL = 1e-12


@dataclass(frozen=True)
class TrueModel:
    """Population parameters of the uncorrupted distribution.

    r      mass of group B, in (0, 1)
    p      mass of each group's positive region, in (0, 1]
    eta    label flip probability, in [0, 1/2)
    theta_a, theta_b default to 1 - p (the canonical thresholds).
    """

    r: float
    p: float
    eta: float
    theta_a: float | None = None
    theta_b: float | None = None

    def __post_init__(self):
        if self.theta_a is None:
            object.__setattr__(self, "theta_a", 1.0 - self.p)
        if self.theta_b is None:
            object.__setattr__(self, "theta_b", 1.0 - self.p)


def validate_model(model: TrueModel) -> TrueModel:
    """Return ``model`` unchanged, raising RangeError naming the first bad field."""
    if not (0.0 < model.r < 1.0):
        raise RangeError(f"r={model.r!r} outside (0, 1)")
    if not (0.0 < model.p <= 1.0):
        raise RangeError(f"p={model.p!r} outside (0, 1]")
    if not (0.0 <= model.eta < 0.5):
        raise RangeError(f"eta={model.eta!r} outside [0, 0.5)")
    for name, theta in (("theta_a", model.theta_a), ("theta_b", model.theta_b)):
        if not (0.0 <= theta <= 1.0):
            raise RangeError(f"{name}={theta!r} outside [0, 1]")
        # positive region must have mass exactly p under the uniform feature law
        if abs(theta - (1.0 - model.p)) > _THETA_TOL:
            raise RangeError(f"{name}={theta!r} inconsistent with p={model.p!r}")
    return model


def base_rate(model: TrueModel) -> float:
    """P(y = 1), identical in both groups: p(1 - eta) + (1 - p) eta."""
    validate_model(model)
    return model.p * (1.0 - model.eta) + (1.0 - model.p) * model.eta


@dataclass(frozen=True)
class DeviationParams:
    """Deviation masses of a hypothesis pair from the reference classifiers.

    p1a, p1b in [0, p]: mass of the positive region classified negative.
    p2a, p2b in [0, 1-p]: mass of the negative region classified positive.
    """

    p1a: float
    p2a: float
    p1b: float
    p2b: float

    @classmethod
    def bayes_optimal(cls) -> "DeviationParams":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def all_negative(cls, p: float) -> "DeviationParams":
        return cls(p, 0.0, p, 0.0)

    @classmethod
    def all_positive(cls, p: float) -> "DeviationParams":
        return cls(0.0, 1.0 - p, 0.0, 1.0 - p)


def validate_deviations(params: DeviationParams, model: TrueModel) -> DeviationParams:
    validate_model(model)
    p = model.p
    for name, value in (("p1a", params.p1a), ("p1b", params.p1b)):
        if not (0.0 <= value <= p + _THETA_TOL):
            raise RangeError(f"{name}={value!r} outside [0, p={p!r}]")
    for name, value in (("p2a", params.p2a), ("p2b", params.p2b)):
        if not (0.0 <= value <= (1.0 - p) + _THETA_TOL):
            raise RangeError(f"{name}={value!r} outside [0, 1-p={1.0 - p!r}]")
    return params


def analytic_true_error(params: DeviationParams, model: TrueModel) -> float:
    """Exact misclassification probability on the true distribution.

    A hypothesis disagreeing with the reference pair on mass d in a group has
    group error eta + d (1 - 2 eta); the total mixes the groups by r.
    """
    validate_deviations(params, model)
    eta = model.eta
    dev_a = params.p1a + params.p2a
    dev_b = params.p1b + params.p2b
    err_a = eta + dev_a * (1.0 - 2.0 * eta)
    err_b = eta + dev_b * (1.0 - 2.0 * eta)
    return (1.0 - model.r) * err_a + model.r * err_b


def thresholds_to_deviations(t_a: float, t_b: float, model: TrueModel) -> DeviationParams:
    """Deviation masses induced by the threshold pair (x >= t_g is positive)."""
    validate_model(model)

    def one(t: float, theta: float) -> tuple[float, float]:
        if not (0.0 <= t <= 1.0):
            raise RangeError(f"threshold {t!r} outside [0, 1]")
        if t >= theta:
            return t - theta, 0.0
        return 0.0, theta - t

    p1a, p2a = one(t_a, model.theta_a)
    p1b, p2b = one(t_b, model.theta_b)
    return DeviationParams(p1a, p2a, p1b, p2b)


def predict(x: np.ndarray, group: np.ndarray, t_a: float, t_b: float) -> np.ndarray:
    """Vectorized threshold-pair prediction: 1 where x >= t of the example's group."""
    thresholds = np.where(group == GROUP_B, t_b, t_a)
    return (x >= thresholds).astype(np.uint8)


@dataclass(frozen=True)
class LabeledExample:
    x: float
    group: str  # "A" or "B"
    label: int
    weight: float = 1.0


@dataclass
class Dataset:
    """Columnar sample: order-preserving arrays, one row per example.

    ``seed`` records the stream that produced the sample (-1 if unknown, for
    example after a CSV import).
    """

    x: np.ndarray       # float64 in [0, 1]
    group: np.ndarray   # uint8, 0 = A, 1 = B
    label: np.ndarray   # uint8 in {0, 1}
    weight: np.ndarray  # float64 > 0
    seed: int

    def __len__(self) -> int:
        return self.x.shape[0]

    def examples(self):
        """Iterate rows as LabeledExample records (small samples only)."""
        for i in range(len(self)):
            yield LabeledExample(
                float(self.x[i]),
                _GROUP_CHARS[int(self.group[i])],
                int(self.label[i]),
                float(self.weight[i]),
            )

    def group_mask(self, group: int) -> np.ndarray:
        return self.group == group


def sample_true(model: TrueModel, n: int, seed: int) -> Dataset:
    """Draw n examples from the true distribution.

    Stream layout is fixed for reproducibility: group indicators, then
    features, then label flips, each one uniform draw per example.
    """
    validate_model(model)
    if n < 1:
        raise RangeError(f"n={n!r} must be >= 1")
    rng = np.random.default_rng(seed)
    in_b = rng.random(n) < model.r
    x = rng.random(n)
    flip = rng.random(n) < model.eta
    theta = np.where(in_b, model.theta_b, model.theta_a)
    label = (x >= theta) ^ flip
    return Dataset(
        x=x,
        group=in_b.astype(np.uint8),
        label=label.astype(np.uint8),
        weight=np.ones(n, dtype=np.float64),
        seed=seed,
    )


def dataset_to_csv(data: Dataset, path: str) -> None:
    """Write ``x,group,label,weight`` rows; features carry 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "group", "label", "weight"])
        for i in range(len(data)):
            writer.writerow([
                format(float(data.x[i]), ".17g"),
                _GROUP_CHARS[int(data.group[i])],
                int(data.label[i]),
                repr(float(data.weight[i])),
            ])


def dataset_from_csv(path: str) -> Dataset:
    """Read a dataset written by :func:`dataset_to_csv`; round-trips exactly."""
    xs: list[float] = []
    groups: list[int] = []
    labels: list[int] = []
    weights: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "group", "label", "weight"]:
            raise RangeError(f"unexpected CSV header {header!r}")
        for row in reader:
            xs.append(float(row[0]))
            if row[1] not in _GROUP_CHARS:
                raise RangeError(f"group={row[1]!r} not in {{'A', 'B'}}")
            groups.append(_GROUP_CHARS.index(row[1]))
            labels.append(int(row[2]))
            weights.append(float(row[3]))
    return Dataset(
        x=np.asarray(xs, dtype=np.float64),
        group=np.asarray(groups, dtype=np.uint8),
        label=np.asarray(labels, dtype=np.uint8),
        weight=np.asarray(weights, dtype=np.float64),
        seed=-1,
    )
