"""Correlation-with-opinion-score evaluation harness.

Raw metric scores are first mapped to the opinion-score scale through a
4-parameter logistic fitted by least squares; PLCC and RMSE are computed
on the mapped values, rank correlation on the raw scores (the logistic
map is monotone, so ranks are unaffected). A two-tailed variance-ratio
test on prediction residuals decides whether one metric predicts
significantly better than another.
"""

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv
from scipy.stats import rankdata

from flowqa.errors import DegenerateInputError, ParseError, ValidationError

_FIT_MAX_ITER = 500
_FIT_REL_TOL = 1e-10
_FIT_RESTARTS = 20
_FIT_STALL_REL_SSE = 1e-14


@dataclass(frozen=True)
class LogisticParams:
    """Parameters of y = b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))."""

    beta1: float
    beta2: float
    beta3: float
    beta4: float

    def __post_init__(self):
        if self.beta4 == 0.0:
            raise ValueError("beta4 must be nonzero")

    def as_array(self):
        return np.array([self.beta1, self.beta2, self.beta3, self.beta4])


@dataclass(frozen=True)
class LogisticFit:
    params: LogisticParams
    sse: float
    converged: bool


@dataclass(frozen=True)
class ManifestRow:
    ref_path: str
    dis_path: str
    dmos: float
    tag: str = ""


@dataclass(frozen=True)
class DatasetManifest:
    rows: tuple

    def __len__(self):
        return len(self.rows)

    @property
    def dmos(self):
        return np.array([r.dmos for r in self.rows])


@dataclass
class EvalReport:
    plcc: float
    srocc: float
    rmse: float
    params: LogisticParams
    fitted: np.ndarray
    residuals: np.ndarray
    converged: bool


def logistic(params, x):
    """Evaluate the 4-parameter logistic at x (array or scalar)."""
    x = np.asarray(x, dtype=np.float64)
    b4 = max(abs(params.beta4), 1e-12)
    z = np.clip(-(x - params.beta3) / b4, -500.0, 500.0)
    return params.beta2 + (params.beta1 - params.beta2) / (1.0 + np.exp(z))


def _sse(theta, x, y):
    p = LogisticParams(theta[0], theta[1], theta[2],
                       theta[3] if theta[3] != 0.0 else 1e-12)
    r = logistic(p, x) - y
    return float(r @ r)


def _nelder_mead(fun, x0, max_iter, rel_tol):
    """Minimize with the standard simplex moves; deterministic.

    Converged when the SSE values across the simplex agree to ``rel_tol``
    relative spread (no vertex can improve the best meaningfully), or
    after ``max_iter`` iterations. Returns (best x, best f, converged).
    """
    n = x0.size
    simplex = [x0.copy()]
    for i in range(n):
        p = x0.copy()
        p[i] = p[i] * 1.05 if p[i] != 0.0 else 0.00025
        simplex.append(p)
    fvals = [fun(p) for p in simplex]

    converged = False
    for _ in range(max_iter):
        order = np.argsort(fvals, kind="stable")
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]

        spread = fvals[-1] - fvals[0]
        if spread <= rel_tol * max(abs(fvals[0]), abs(fvals[-1]), 1e-300):
            converged = True
            break

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        refl = centroid + (centroid - worst)
        f_refl = fun(refl)
        if f_refl < fvals[0]:
            expa = centroid + 2.0 * (centroid - worst)
            f_expa = fun(expa)
            if f_expa < f_refl:
                simplex[-1], fvals[-1] = expa, f_expa
            else:
                simplex[-1], fvals[-1] = refl, f_refl
        elif f_refl < fvals[-2]:
            simplex[-1], fvals[-1] = refl, f_refl
        else:
            contr = centroid + 0.5 * (worst - centroid)
            f_contr = fun(contr)
            if f_contr < fvals[-1]:
                simplex[-1], fvals[-1] = contr, f_contr
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = fun(simplex[i])

    order = int(np.argmin(fvals))
    return simplex[order], fvals[order], converged


def fit_logistic(scores, dmos):
    """Least-squares fit of the 4-parameter logistic, scores -> dmos.

    Deterministic: fixed initialization (b1 = max dmos, b2 = min dmos,
    b3 = mean score, b4 = score std floored at 1e-6) plus seeded jitter
    restarts when the search stalls with a poor fit.
    """
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(dmos, dtype=np.float64)
    if x.size != y.size:
        raise DegenerateInputError("scores and dmos lengths differ")
    if x.size < 5:
        raise DegenerateInputError(
            f"logistic fit needs at least 5 samples, got {x.size}")
    if not np.isfinite(y).all() or not np.isfinite(x).all():
        raise DegenerateInputError("scores and dmos must be finite")
    if np.ptp(x) == 0.0:
        raise DegenerateInputError("all scores identical; fit is degenerate")

    # |b4| makes the curve direction depend only on the order of b1/b2,
    # so orient the asymptote initialization by the raw correlation sign
    # (metrics like PSNR anti-correlate with opinion scores).
    lo, hi = y.min(), y.max()
    decreasing = np.ptp(y) > 0.0 and plcc(x, y) < 0.0
    theta0 = np.array([lo if decreasing else hi,
                       hi if decreasing else lo,
                       x.mean(), max(float(x.std()), 1e-6)])
    sst = float(((y - y.mean()) ** 2).sum())
    floor = max(sst, 1.0) * _FIT_STALL_REL_SSE

    best_x, best_f, best_conv = _nelder_mead(
        lambda t: _sse(t, x, y), theta0, _FIT_MAX_ITER, _FIT_REL_TOL)
    rng = np.random.default_rng(20221206)
    restarts = 0
    while best_f > floor and restarts < _FIT_RESTARTS:
        start = theta0.copy()
        start[2] += float(rng.normal(0.0, 0.5)) * max(float(x.std()), 1e-6)
        start[3] *= math.exp(float(rng.normal(0.0, 0.5)))
        cand_x, cand_f, cand_conv = _nelder_mead(
            lambda t: _sse(t, x, y), start, _FIT_MAX_ITER, _FIT_REL_TOL)
        if cand_f < best_f:
            best_x, best_f, best_conv = cand_x, cand_f, cand_conv
        restarts += 1

    b4 = best_x[3] if best_x[3] != 0.0 else 1e-12
    params = LogisticParams(best_x[0], best_x[1], best_x[2], b4)
    return LogisticFit(params, best_f, best_conv)


def plcc(fitted, dmos):
    """Pearson linear correlation coefficient."""
    a = np.asarray(fitted, dtype=np.float64)
    b = np.asarray(dmos, dtype=np.float64)
    if a.size != b.size or a.size < 2:
        raise DegenerateInputError("plcc needs two equal-length vectors")
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float(da @ da))
    nb = math.sqrt(float(db @ db))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("correlation undefined for constant input")
    return float(da @ db) / (na * nb)


def srocc(scores, dmos):
    """Spearman rank-order correlation; ties get their mean rank."""
    a = np.asarray(scores, dtype=np.float64)
    b = np.asarray(dmos, dtype=np.float64)
    if a.size != b.size or a.size < 2:
        raise DegenerateInputError("srocc needs two equal-length vectors")
    return plcc(rankdata(a), rankdata(b))


def rmse(fitted, dmos):
    a = np.asarray(fitted, dtype=np.float64)
    b = np.asarray(dmos, dtype=np.float64)
    if a.size != b.size or a.size == 0:
        raise DegenerateInputError("rmse needs two equal-length vectors")
    return math.sqrt(float(((a - b) ** 2).mean()))


def f_critical(dof1, dof2, upper_tail):
    """Upper-tail critical value of the F distribution.

    Inverts the CDF through the regularized incomplete beta function:
    CDF(x) = I_{d1 x / (d1 x + d2)}(d1/2, d2/2).
    """
    z = betaincinv(dof1 / 2.0, dof2 / 2.0, 1.0 - upper_tail)
    return float(dof2 * z / (dof1 * (1.0 - z)))


def f_test(residuals_a, residuals_b, alpha=0.05):
    """Two-tailed variance-ratio test between residual vectors.

    Returns +1 when ``a`` has significantly smaller variance than ``b``
    at level ``alpha``, -1 when significantly larger, 0 otherwise.
    """
    a = np.asarray(residuals_a, dtype=np.float64)
    b = np.asarray(residuals_b, dtype=np.float64)
    if a.size != b.size:
        raise DegenerateInputError("residual vectors must have equal length")
    if a.size < 3:
        raise DegenerateInputError("f_test needs at least 3 samples")
    var_a = float(a.var(ddof=1))
    var_b = float(b.var(ddof=1))
    if var_a == 0.0 and var_b == 0.0:
        return 0
    if var_b == 0.0:
        return -1
    if var_a == 0.0:
        return 1
    upper = f_critical(a.size - 1, b.size - 1, alpha / 2.0)
    ratio = var_a / var_b
    if ratio > upper:
        return -1
    if ratio < 1.0 / upper:
        return 1
    return 0


def load_manifest(path, check_paths=False):
    """Read a ``ref,dis,dmos[,tag]`` CSV into a DatasetManifest."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty manifest") from None
        header = [h.strip().lower() for h in header]
        if header[:3] != ["ref", "dis", "dmos"]:
            raise ValidationError(
                f"{path}: header must start with ref,dis,dmos "
                f"(got {','.join(header)})")
        has_tag = len(header) > 3 and header[3] == "tag"
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise ValidationError(
                    f"{path}:{lineno}: expected at least 3 columns")
            try:
                dmos = float(row[2])
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: dmos value {row[2]!r} is not a "
                    "number") from None
            if not math.isfinite(dmos):
                raise ValidationError(f"{path}:{lineno}: dmos must be finite")
            tag = row[3].strip() if has_tag and len(row) > 3 else ""
            rows.append(ManifestRow(row[0].strip(), row[1].strip(),
                                    dmos, tag))
    if check_paths:
        base = os.path.dirname(os.path.abspath(path))
        for row in rows:
            for p in (row.ref_path, row.dis_path):
                resolved = p if os.path.isabs(p) else os.path.join(base, p)
                if not os.path.exists(resolved):
                    raise ValidationError(f"{path}: missing file {p}")
    return DatasetManifest(tuple(rows))


def build_report(scores, dmos):
    """Fit the logistic map and compute PLCC/SROCC/RMSE and residuals."""
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(dmos, dtype=np.float64)
    fit = fit_logistic(x, y)
    fitted = logistic(fit.params, x)
    residuals = y - fitted
    return EvalReport(
        plcc=plcc(fitted, y),
        srocc=srocc(x, y),
        rmse=rmse(fitted, y),
        params=fit.params,
        fitted=fitted,
        residuals=residuals,
        converged=fit.converged,
    )
