"""Monte-Carlo evaluation of imputation methods on a logistic analysis model.

One replication draws a sample from a population, redraws its response from
the population coefficients, hides cells completely at random, and analyses
the result with each method. Bias, coverage and median interval width are
then aggregated over replications.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .data import MISSING, CategoricalTable, VariableMeta, read_table
from .errors import DataError, MimcaError
from .glm import (ModelFormula, build_design, coefficient_names, fit_formula)
from .multiple import (as_seed_sequence, listwise_delete, mimca, sample_impute)
from .pooling import pool_fits
from .select import cross_validate_dims

log = logging.getLogger(__name__)

METHODS = ("mimca", "sample", "listwise", "full")
MAX_FAILURE_FRACTION = 0.10


def agresti_coull_lower(p: float, n: int, level: float = 0.95) -> float:
    """Lower bound of the Agresti-Coull interval for a proportion ``p`` out of ``n``."""
    z = norm.ppf(1 - (1 - level) / 2)
    n_t = n + z * z
    p_t = (n * p + z * z / 2) / n_t
    return float(p_t - z * np.sqrt(p_t * (1 - p_t) / n_t))


def synthetic_population(size: int = 2000, seed=0, strength: float = 1.0
                         ) -> tuple[CategoricalTable, ModelFormula]:
    """Six-variable categorical population with a known logistic response.

    Covariates ``x1``..``x5`` (2, 3, 4, 3 and 2 categories) are ordinal cuts of
    two correlated latent factors, so they are mutually associated. The
    response ``y`` follows a main-effects logistic model in ``x1``, ``x2`` and
    ``x3`` with slopes increasing along the category order, scaled by
    ``strength``.
    """
    rng = np.random.default_rng(seed)
    f1 = rng.standard_normal(size)
    f2 = 0.5 * f1 + np.sqrt(0.75) * rng.standard_normal(size)
    spec = {  # cut points, loading on f1, loading on f2
        "x1": ([0.0], 0.85, 0.0),
        "x2": ([-0.5, 0.5], 0.8, 0.0),
        "x3": ([-0.8, 0.0, 0.8], 0.0, 0.85),
        "x4": ([-0.4, 0.6], 0.0, 0.8),
        "x5": ([0.3], 0.6, 0.5),
    }
    codes = {}
    for name, (cuts, a1, a2) in spec.items():
        signal = a1 * f1 + a2 * f2
        noise_sd = np.sqrt(max(1.0 - signal.var(), 0.1))
        codes[name] = np.searchsorted(cuts, signal + noise_sd * rng.standard_normal(size))
    slopes = {"x1": [1.0], "x2": [0.6, 1.2], "x3": [0.4, 0.9, 1.4]}
    eta = np.full(size, -1.6)
    for name, b in slopes.items():
        b = np.concatenate([[0.0], strength * np.asarray(b)])
        eta += b[codes[name]]
    y = (rng.random(size) < expit(eta)).astype(int)
    variables = [VariableMeta("y", ("no", "yes"))]
    variables += [VariableMeta(n, tuple(f"{n}_{j + 1}" for j in range(len(c[0]) + 1)))
                  for n, c in spec.items()]
    table = CategoricalTable(np.column_stack([y] + [codes[n] for n in spec]),
                             variables)
    return table, ModelFormula("y", "yes", ("x1", "x2", "x3"))


def latent_class_table(n_rows: int, n_variables: int, n_categories: int = 3,
                       n_classes: int = 3, purity: float = 0.9,
                       seed=None) -> CategoricalTable:
    """Categorical table from a latent class model.

    Each row belongs to one of ``n_classes`` classes; each variable takes the
    class's preferred category with probability ``purity`` and a uniform draw
    otherwise. The centred expected indicator matrix has rank
    ``n_classes - 1``, which makes the table a benchmark for dimension choice.
    """
    if n_classes > n_categories:
        raise ValueError("n_classes cannot exceed n_categories")
    rng = np.random.default_rng(seed)
    cls = rng.integers(0, n_classes, n_rows)
    codes = np.empty((n_rows, n_variables), dtype=np.int64)
    for k in range(n_variables):
        pref = rng.permutation(n_categories)[:n_classes][cls]
        other = rng.integers(0, n_categories, n_rows)
        codes[:, k] = np.where(rng.random(n_rows) < purity, pref, other)
    variables = [VariableMeta(f"v{k + 1}", tuple(f"c{j + 1}" for j in range(n_categories)))
                 for k in range(n_variables)]
    return CategoricalTable(codes, variables)


def estimate_population_truth(population: CategoricalTable,
                              formula: ModelFormula) -> np.ndarray:
    return fit_formula(population, formula).coefficients


def draw_sample_and_response(population: CategoricalTable, psi, formula: ModelFormula,
                             n: int, rng: np.random.Generator) -> CategoricalTable:
    """Rows drawn without replacement; response redrawn from ``logistic(X psi)``."""
    if n > population.n_rows:
        raise DataError("sample size exceeds population size")
    r = population.column(formula.response)
    labels = population.variables[r].labels
    if len(labels) != 2:
        raise DataError("response must be binary")
    rows = np.sort(rng.choice(population.n_rows, size=n, replace=False))
    sample = population.take_rows(rows)
    X, _ = build_design(sample, formula)
    success = labels.index(formula.success)
    draw = rng.random(n) < expit(X @ np.asarray(psi, dtype=float))
    codes = np.array(sample.codes)
    codes[:, r] = np.where(draw, success, 1 - success)
    return sample.with_codes(codes)


def amputate_mcar(table: CategoricalTable, rate: float, rng: np.random.Generator,
                  scope=None, max_retries: int = 100) -> CategoricalTable:
    """Hide each in-scope cell independently with probability ``rate``.

    Draws that leave a variable with no observed cell are repeated.
    """
    if not 0 < rate < 1:
        raise ValueError("rate must be in (0, 1)")
    cols = (np.arange(table.n_variables) if scope is None
            else np.array([table.column(s) for s in scope], dtype=int))
    for _ in range(max_retries):
        hide = np.zeros(table.codes.shape, dtype=bool)
        hide[:, cols] = rng.random((table.n_rows, cols.size)) < rate
        codes = np.where(hide, MISSING, table.codes)
        if np.all((codes != MISSING).any(axis=0)):
            return table.with_codes(codes)
    raise DataError("amputation left a variable without observed values")


@dataclass
class SimulationConfig:
    population: CategoricalTable
    formula: ModelFormula
    n: int
    missing_rate: float = 0.20
    T: int = 200
    M: int = 5
    methods: tuple[str, ...] = METHODS
    dims: int | str = "cv"
    seed: int = 0
    scope: tuple[str, ...] | None = None
    epsilon: float = 1e-6
    truth: np.ndarray | None = None
    cv_candidates: tuple[int, ...] = (1, 2, 3, 4, 5)
    cv_repetitions: int = 5
    cv_fraction: float = 0.05

    def __post_init__(self):
        if self.n > self.population.n_rows:
            raise ValueError("n exceeds the population size")
        if not 0 < self.missing_rate < 1:
            raise ValueError("missing_rate must be in (0, 1)")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        for name in self.formula.variables:
            self.population.column(name)


@dataclass
class SimulationReport:
    methods: tuple[str, ...]
    coefficients: list[str]
    truth: np.ndarray
    dims: int | None
    estimates: dict[str, np.ndarray]   # (T, P), NaN on failure
    lower: dict[str, np.ndarray]
    upper: dict[str, np.ndarray]
    status: dict[str, list[str]] = field(default_factory=dict)

    def _ok(self, method):
        return np.array([s == "ok" for s in self.status[method]])

    def bias(self, method) -> np.ndarray:
        ok = self._ok(method)
        return np.mean(self.estimates[method][ok] - self.truth, axis=0)

    def coverage(self, method) -> np.ndarray:
        ok = self._ok(method)
        lo, hi = self.lower[method][ok], self.upper[method][ok]
        return np.mean((lo <= self.truth) & (self.truth <= hi), axis=0)

    def median_width(self, method) -> np.ndarray:
        ok = self._ok(method)
        return np.median(self.upper[method][ok] - self.lower[method][ok], axis=0)

    def failures(self, method) -> int:
        return int((~self._ok(method)).sum())

    def summary_rows(self) -> list[dict]:
        rows = []
        for m in self.methods:
            bias, cov, wid = self.bias(m), self.coverage(m), self.median_width(m)
            for j, name in enumerate(self.coefficients):
                rows.append({"method": m, "coefficient": name,
                             "truth": float(self.truth[j]), "bias": float(bias[j]),
                             "coverage": float(cov[j]), "median_width": float(wid[j]),
                             "n_ok": int(self._ok(m).sum()),
                             "n_failed": self.failures(m)})
        return rows

    def run_rows(self) -> list[dict]:
        T = len(next(iter(self.status.values())))
        rows = []
        for t in range(T):
            row = {"replication": t + 1}
            for m in self.methods:
                row[f"{m}.status"] = self.status[m][t]
                for j, name in enumerate(self.coefficients):
                    row[f"{m}.{name}.estimate"] = float(self.estimates[m][t, j])
                    row[f"{m}.{name}.lower"] = float(self.lower[m][t, j])
                    row[f"{m}.{name}.upper"] = float(self.upper[m][t, j])
            rows.append(row)
        return rows

    def write(self, prefix, delimiter: str = ",") -> list[Path]:
        prefix = Path(prefix)
        paths = []
        for suffix, rows in (("summary", self.summary_rows()), ("runs", self.run_rows())):
            p = prefix.with_name(f"{prefix.name}_{suffix}.csv")
            with open(p, "w", newline="", encoding="utf-8") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]), delimiter=delimiter,
                                   lineterminator="\n")
                w.writeheader()
                for r in rows:
                    w.writerow({k: (repr(float(v)) if isinstance(v, float) else v)
                                for k, v in r.items()})
            paths.append(p)
        return paths

    def format_summary(self) -> str:
        lines = [f"{'method':<9} {'coefficient':<14} {'truth':>8} {'bias':>8} "
                 f"{'coverage':>8} {'width':>8} {'failed':>6}"]
        for r in self.summary_rows():
            lines.append(f"{r['method']:<9} {r['coefficient']:<14} {r['truth']:>8.3f} "
                         f"{r['bias']:>8.3f} {r['coverage']:>8.3f} "
                         f"{r['median_width']:>8.3f} {r['n_failed']:>6d}")
        if self.dims is not None:
            lines.append(f"MCA dimensions: {self.dims}")
        return "\n".join(lines)


def _wald(table, formula):
    fit = fit_formula(table, formula)
    lo, hi = fit.wald_interval()
    return fit.coefficients, lo, hi


def _replicate(cfg: SimulationConfig, psi, dims, seed_seq):
    s_sample, s_amp, s_mimca, s_naive = seed_seq.spawn(4)
    full = draw_sample_and_response(cfg.population, psi, cfg.formula, cfg.n,
                                    np.random.default_rng(s_sample))
    inc = amputate_mcar(full, cfg.missing_rate, np.random.default_rng(s_amp), cfg.scope)
    out = {}
    for method in cfg.methods:
        try:
            if method == "full":
                out[method] = _wald(full, cfg.formula)
            elif method == "listwise":
                sub = listwise_delete(inc.select(cfg.formula.variables))
                out[method] = _wald(sub, cfg.formula)
            elif method == "sample":
                out[method] = _wald(sample_impute(inc, np.random.default_rng(s_naive)),
                                    cfg.formula)
            else:
                iset = mimca(inc, dims, cfg.M, cfg.epsilon, seed=s_mimca)
                pooled = pool_fits([fit_formula(t, cfg.formula) for t in iset.tables])
                out[method] = (np.array([p.estimate for p in pooled]),
                               np.array([p.ci_low for p in pooled]),
                               np.array([p.ci_high for p in pooled]))
        except MimcaError as exc:
            out[method] = str(exc)
    return out


def choose_dims(cfg: SimulationConfig, psi) -> int:
    """Cross-validated dimension on a pilot replication drawn from its own stream."""
    pilot_seq = np.random.SeedSequence([cfg.seed, 1])
    s_sample, s_amp, s_cv = pilot_seq.spawn(3)
    pilot = draw_sample_and_response(cfg.population, psi, cfg.formula, cfg.n,
                                     np.random.default_rng(s_sample))
    pilot = amputate_mcar(pilot, cfg.missing_rate, np.random.default_rng(s_amp), cfg.scope)
    J = int(pilot.n_categories.sum())
    cands = [c for c in cfg.cv_candidates if c <= J - pilot.n_variables]
    res = cross_validate_dims(pilot, cands, cfg.cv_repetitions, cfg.cv_fraction,
                              seed=s_cv, epsilon=cfg.epsilon)
    return res.best


def run_simulation(cfg: SimulationConfig, threads: int = 1) -> SimulationReport:
    psi = (estimate_population_truth(cfg.population, cfg.formula)
           if cfg.truth is None else np.asarray(cfg.truth, dtype=float))
    names = coefficient_names(cfg.population, cfg.formula)
    if psi.size != len(names):
        raise ValueError("truth length differs from the number of coefficients")
    dims = None
    if "mimca" in cfg.methods:
        dims = choose_dims(cfg, psi) if cfg.dims == "cv" else int(cfg.dims)
    streams = np.random.SeedSequence([cfg.seed, 0]).spawn(cfg.T)

    def job(t):
        return _replicate(cfg, psi, dims, streams[t])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(cfg.T)))
    else:
        results = [job(t) for t in range(cfg.T)]

    P = len(names)
    est, lo, hi, status = {}, {}, {}, {}
    for m in cfg.methods:
        est[m] = np.full((cfg.T, P), np.nan)
        lo[m] = np.full((cfg.T, P), np.nan)
        hi[m] = np.full((cfg.T, P), np.nan)
        status[m] = []
        for t, res in enumerate(results):
            r = res[m]
            if isinstance(r, str):
                status[m].append(r)
                continue
            est[m][t], lo[m][t], hi[m][t] = r
            status[m].append("ok")
        n_fail = sum(s != "ok" for s in status[m])
        if n_fail > MAX_FAILURE_FRACTION * cfg.T:
            raise MimcaError(
                f"method {m!r} failed in {n_fail} of {cfg.T} replications")
        if n_fail:
            log.warning("method %s: %d failed replications excluded", m, n_fail)
    return SimulationReport(tuple(cfg.methods), names, psi, dims, est, lo, hi, status)


def load_config(path) -> SimulationConfig:
    """Read a flat ``key = value`` configuration file.

    ``population`` is either a delimited file (relative to the config file) or
    ``synthetic``; in the latter case ``population_size``, ``population_seed``
    and ``strength`` configure :func:`synthetic_population`, and ``formula``
    defaults to the generator's model.
    """
    path = Path(path)
    raw = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        raw[key.strip().lower()] = value.strip()
    known = {"population", "population_size", "population_seed", "strength",
             "formula", "n", "missing_rate", "t", "m", "methods", "dims", "seed",
             "scope", "epsilon", "cv_candidates", "cv_repetitions", "cv_fraction",
             "missing_token", "delimiter"}
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"unknown configuration keys {sorted(unknown)}")
    pop = raw.get("population", "synthetic")
    formula = None
    if pop == "synthetic":
        population, formula = synthetic_population(
            int(raw.get("population_size", 2000)), int(raw.get("population_seed", 0)),
            float(raw.get("strength", 1.0)))
    else:
        src = Path(pop)
        if not src.is_absolute():
            src = path.parent / src
        delim = raw.get("delimiter", ",")
        population = read_table(src, raw.get("missing_token", "NA"),
                                "\t" if delim in ("\\t", "tab") else delim)
    if "formula" in raw:
        formula = ModelFormula.parse(raw["formula"])
    if formula is None:
        raise DataError("formula is required for a file population")

    def ints(s):
        return tuple(int(x) for x in s.split(",") if x.strip())

    kwargs = {}
    if "n" in raw:
        kwargs["n"] = int(raw["n"])
    else:
        kwargs["n"] = min(300, population.n_rows)
    for key, conv in (("missing_rate", float), ("t", int), ("m", int),
                      ("seed", int), ("epsilon", float), ("cv_repetitions", int),
                      ("cv_fraction", float)):
        if key in raw:
            kwargs[{"t": "T", "m": "M"}.get(key, key)] = conv(raw[key])
    if "methods" in raw:
        kwargs["methods"] = tuple(s.strip().lower() for s in raw["methods"].split(",")
                                  if s.strip())
    if "dims" in raw:
        kwargs["dims"] = "cv" if raw["dims"].lower() == "cv" else int(raw["dims"])
    if "scope" in raw and raw["scope"].lower() != "all":
        kwargs["scope"] = tuple(s.strip() for s in raw["scope"].split(",") if s.strip())
    if "cv_candidates" in raw:
        kwargs["cv_candidates"] = ints(raw["cv_candidates"])
    return SimulationConfig(population=population, formula=formula, **kwargs)
