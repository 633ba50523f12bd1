"""Reproducible experiments: config parsing, sweeps and CSV output.

Every experiment writes ``<kind>.csv`` (plus, for some kinds, auxiliary
CSVs) and a ``<kind>.json`` sidecar into the output directory. Each CSV
starts with ``#``-prefixed ``key=value`` lines holding the fully resolved
parameters, followed by a header row. Floats are written with ``repr`` so
that the same spec and seed always produce the same bytes.

Config files are INI text with the sections below; missing keys keep the
defaults of the chosen experiment. ``snr_db`` values are decibels and are
converted to linear ratios on load.

.. code-block:: ini

    [run]
    kind = sweep-distance
    seed = 0
    trials = 200
    jobs = 1
    [field]
    spectral_length = 32
    spectral_length_y = 32
    [aperture]
    dim = 2
    width = 2.0
    lobe_order = 0
    density = 16
    [pilot]
    z_p = 7
    snr_db = 20
    epsilon = 0.1
    gamma = 0.95
    [rate]
    bandwidth = 30000
    coherence = 1200
    [sweep]
    snr_db_values = 0, 20
    lobe_orders = 0, 1, 2, 3
    widths = 1, 2, 3
    z_p_values = 1, 2, 3
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import _rng
from .aperture import ApertureSpec, observe, sampling_distance, sampling_grid
from .field import FieldConfig, draw_realization, evaluate_grid
from .pilots import (
    CiSpec,
    PilotConfig,
    ci_probability,
    db_to_linear,
    mle_estimate,
    min_pilots,
    min_pilots_closed_form,
    pilot_sequence,
    simulate_pilots,
)
from .rates import RateConfig, monte_carlo_rates
from .reconstruction import DenseGrid, nmse, power_spectrum, reconstruct

__all__ = [
    "KINDS",
    "ExperimentSpec",
    "ConfigError",
    "InvariantViolation",
    "parse_config",
    "load_config",
    "nmse_trials",
    "run",
]

KINDS = (
    "recon-demo-1d",
    "recon-demo-2d",
    "spectrum",
    "sweep-distance",
    "sweep-width",
    "ci-validate",
    "rate-vs-zp",
    "rate-vs-width",
)

HALF_WAVELENGTH = 0.5


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the key."""


class InvariantViolation(RuntimeError):
    """A result broke a property that must hold exactly."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved experiment parameters.

    Use :meth:`defaults` for the settings of a given kind; lengths are in
    wavelengths and ``snr_db`` values in decibels.
    """

    kind: str = "recon-demo-2d"
    seed: int = 0
    trials: int = 1
    jobs: int = 1
    out: str = "results"
    spectral_length: int = 32
    spectral_length_y: int = 32
    dim: int = 2
    width: float = 2.0
    lobe_order: int = 0
    density: int = 16
    z_p: int = 7
    snr_db: float = 20.0
    epsilon: float = 0.1
    gamma: float = 0.95
    bandwidth: float = 30e3
    coherence: int = 1200
    snr_db_values: tuple = (0.0, 20.0)
    lobe_orders: tuple = (0, 1, 2, 3)
    widths: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
    z_p_values: tuple = tuple(range(1, 17))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown experiment {self.kind!r}; choose from {', '.join(KINDS)}")
        for name in ("trials", "jobs", "spectral_length", "spectral_length_y", "density", "z_p", "coherence"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed: must be non-negative")
        if self.dim not in (1, 2):
            raise ConfigError("dim: must be 1 or 2")
        if self.lobe_order < 0 or any(d < 0 for d in self.lobe_orders):
            raise ConfigError("lobe_order: must be >= 0")
        if not (self.width > 0 and self.bandwidth > 0 and self.epsilon > 0):
            raise ConfigError("width, bandwidth and epsilon must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma: must lie in (0, 1)")
        if any(w <= 0 for w in self.widths):
            raise ConfigError("widths: must be positive")
        if any(z < 1 for z in self.z_p_values):
            raise ConfigError("z_p_values: must be >= 1")

    @classmethod
    def defaults(cls, kind: str = "recon-demo-2d") -> "ExperimentSpec":
        if kind not in KINDS:
            raise ConfigError(f"kind: unknown experiment {kind!r}; choose from {', '.join(KINDS)}")
        return cls(kind=kind, **_KIND_DEFAULTS[kind])

    @property
    def snr(self) -> float:
        return db_to_linear(self.snr_db)

    def field_config(self) -> FieldConfig:
        return FieldConfig(
            dim=self.dim,
            spectral_length=self.spectral_length,
            spectral_length_y=self.spectral_length_y if self.dim == 2 else None,
        )

    def aperture(self, width: float | None = None) -> ApertureSpec:
        return ApertureSpec(dim=self.dim, width=self.width if width is None else width)

    def rate_config(self, z_p: int | None = None) -> RateConfig:
        return RateConfig(bandwidth=self.bandwidth, coherence=self.coherence, snr=self.snr,
                          z_p=self.z_p if z_p is None else z_p)

    def header(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            if f.name in ("out", "jobs"):
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(_fmt(v) for v in value)
            out.append((f.name, _fmt(value)))
        return out


_KIND_DEFAULTS = {
    "recon-demo-1d": dict(dim=1, width=4.0),
    "recon-demo-2d": dict(),
    "spectrum": dict(dim=1, trials=200),
    "sweep-distance": dict(trials=200),
    "sweep-width": dict(dim=1, trials=100, snr_db_values=(20.0,)),
    "ci-validate": dict(trials=100_000, snr_db_values=(10.0, 20.0)),
    "rate-vs-zp": dict(trials=500, snr_db=10.0, z_p_values=tuple(range(1, 15))),
    "rate-vs-width": dict(trials=500, snr_db=10.0, widths=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)),
}

# section -> key -> parser
_SCHEMA = {
    "run": {"kind": str, "seed": int, "trials": int, "jobs": int, "out": str},
    "field": {"spectral_length": int, "spectral_length_y": int},
    "aperture": {"dim": int, "width": float, "lobe_order": int, "density": int},
    "pilot": {"z_p": int, "snr_db": float, "epsilon": float, "gamma": float},
    "rate": {"bandwidth": float, "coherence": int},
    "sweep": {
        "snr_db_values": (float,),
        "lobe_orders": (int,),
        "widths": (float,),
        "z_p_values": (int,),
    },
}


def _line_of(text: str, section: str, key: str | None = None) -> int:
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return lineno
    return 0


def _convert(kind, raw: str):
    if isinstance(kind, tuple):
        return tuple(_convert(kind[0], part.strip()) for part in raw.split(",") if part.strip())
    if kind is int:
        return int(raw)
    if kind is float:
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError("not finite")
        return value
    return raw.strip()


def parse_config(text: str, kind: str | None = None) -> ExperimentSpec:
    """Build a spec from INI ``text`` on top of the defaults of its kind.

    ``kind`` (from the command line) must agree with ``[run] kind`` when
    both are given. Unknown sections or keys and malformed values raise
    :class:`ConfigError` naming the key and its line.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"line {_line_of(text, section)}: unknown section [{section}]")
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            if key not in _SCHEMA[section]:
                raise ConfigError(f"line {line}: unknown key {key!r} in [{section}]")
            try:
                values[key] = _convert(_SCHEMA[section][key], raw)
            except ValueError:
                raise ConfigError(f"line {line}: bad value for {key!r}: {raw!r}") from None
    cfg_kind = values.pop("kind", None)
    if kind is not None and cfg_kind is not None and kind != cfg_kind:
        raise ConfigError(f"kind: config says {cfg_kind!r} but {kind!r} was requested")
    base = ExperimentSpec.defaults(kind or cfg_kind or "recon-demo-2d")
    return replace(base, **values)


def load_config(path, kind: str | None = None) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), kind)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, spec: ExperimentSpec, columns, rows, extra_header=()) -> None:
    buf = io.StringIO()
    for key, value in [*spec.header(), *extra_header]:
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _parallel_map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _stderr(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def _check_finite(name, values) -> None:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvariantViolation(f"{name}: non-finite values")


# --- NMSE sweeps -------------------------------------------------------------


def _nmse_trial(task):
    field_config, seed, trial, points, width, density = task
    field = draw_realization(field_config, _rng.trial_seed(seed, _rng.FIELD_STREAM, trial))
    aperture = ApertureSpec(dim=field_config.dim, width=width)
    out = []
    for p, (distance, pilot) in enumerate(points):
        lattice = sampling_grid(aperture, distance=distance)
        noise = _rng.child(seed, _rng.PILOT_STREAM, trial, p)
        samples = observe(field, lattice, pilot, noise)
        grid = DenseGrid.over(aperture, lattice.spacing, density)
        out.append(nmse(reconstruct(samples, grid), field))
    return out


def nmse_trials(spec: ExperimentSpec, width: float, points) -> np.ndarray:
    """NMSE per trial (rows) and point (columns).

    ``points`` is a sequence of ``(distance, PilotConfig or None)``. Trial
    ``t`` reuses one field realization for every point.
    """
    fc = spec.field_config()
    tasks = [(fc, spec.seed, t, points, width, spec.density) for t in range(spec.trials)]
    arr = np.array(_parallel_map(_nmse_trial, tasks, spec.jobs), dtype=float)
    _check_finite("nmse", arr)
    if np.any(arr < 0):
        raise InvariantViolation("nmse: negative value")
    return arr


def _distance_points(spec: ExperimentSpec, width: float):
    points = [("half-wavelength", None, HALF_WAVELENGTH)]
    for d in spec.lobe_orders:
        points.append((f"D{d}", d, sampling_distance(width, d)))
    return points


def _sweep_distance(spec: ExperimentSpec, out: str):
    labels = _distance_points(spec, spec.width)
    points = [(dist, PilotConfig(z_p=spec.z_p, snr=db_to_linear(s)))
              for s in spec.snr_db_values for _, _, dist in labels]
    arr = nmse_trials(spec, spec.width, points)
    rows = []
    aperture = spec.aperture()
    i = 0
    for s in spec.snr_db_values:
        for label, d, dist in labels:
            col = arr[:, i]
            rows.append([s, label, "" if d is None else d, dist,
                         sampling_grid(aperture, distance=dist).n_samples,
                         spec.trials, col.mean(), _stderr(col)])
            i += 1
    path = os.path.join(out, f"{spec.kind}.csv")
    _write_csv(path, spec, ["snr_db", "label", "lobe_order", "distance", "n_samples",
                            "trials", "nmse_mean", "nmse_stderr"], rows)
    return [path], {}


def _sweep_width(spec: ExperimentSpec, out: str):
    rows = []
    for w in spec.widths:
        d0 = sampling_distance(w, 0)
        exact = 1.0 / (2.0 * w + 2.0)
        if not math.isclose(HALF_WAVELENGTH - d0, exact, rel_tol=1e-12):
            raise InvariantViolation(f"spacing gap at width {w} differs from 1/(2W+2)")
        for s in spec.snr_db_values:
            pilot = PilotConfig(z_p=spec.z_p, snr=db_to_linear(s))
            arr = nmse_trials(spec, w, [(HALF_WAVELENGTH, pilot), (d0, pilot)])
            gap = arr[:, 0] - arr[:, 1]
            rows.append([w, s, HALF_WAVELENGTH, d0, HALF_WAVELENGTH - d0, spec.trials,
                         arr[:, 0].mean(), _stderr(arr[:, 0]), arr[:, 1].mean(), _stderr(arr[:, 1]),
                         gap.mean(), _stderr(gap)])
    path = os.path.join(out, f"{spec.kind}.csv")
    _write_csv(path, spec, ["width", "snr_db", "distance_half", "distance_d0", "distance_gap", "trials",
                            "nmse_half_mean", "nmse_half_stderr", "nmse_d0_mean", "nmse_d0_stderr",
                            "nmse_gap_mean", "nmse_gap_stderr"], rows)
    return [path], {}


# --- reconstruction demos and spectra ------------------------------------------


def _recon_demo(spec: ExperimentSpec, out: str):
    fc = spec.field_config()
    field = draw_realization(fc, _rng.trial_seed(spec.seed, _rng.FIELD_STREAM, 0))
    aperture = spec.aperture()
    d_opt = sampling_distance(spec.width, spec.lobe_order)
    grid = DenseGrid.over(aperture, d_opt, spec.density)
    truth = evaluate_grid(field, *grid.axes)
    pilot = PilotConfig(z_p=spec.z_p, snr=spec.snr)
    estimates, summary = [], []
    for p, (label, dist) in enumerate([("half", HALF_WAVELENGTH), (f"d{spec.lobe_order}", d_opt)]):
        lattice = sampling_grid(aperture, distance=dist)
        samples = observe(field, lattice, pilot, _rng.child(spec.seed, _rng.PILOT_STREAM, 0, p))
        est = reconstruct(samples, grid).values
        estimates.append((label, est))
        summary.append([label, dist, lattice.n_samples, nmse(est, truth, grid)])
    _check_finite("reconstruction", [np.abs(e).max() for _, e in estimates])
    names = ["x", "y"][: spec.dim]
    columns = [*names, "true_re", "true_im"]
    for label, _ in estimates:
        columns += [f"est_{label}_re", f"est_{label}_im"]
    flat = [e.ravel() for _, e in estimates]
    rows = []
    for i, pos in enumerate(grid.positions):
        row = [*pos, truth.flat[i].real, truth.flat[i].imag]
        for e in flat:
            row += [e[i].real, e[i].imag]
        rows.append(row)
    main = os.path.join(out, f"{spec.kind}.csv")
    _write_csv(main, spec, columns, rows)
    side = os.path.join(out, f"{spec.kind}-nmse.csv")
    _write_csv(side, spec, ["label", "distance", "n_samples", "nmse"], summary)
    return [main, side], {"nmse": {r[0]: r[3] for r in summary}}


def _spectrum(spec: ExperimentSpec, out: str):
    """Mean periodogram of the aperture-limited channel."""
    fc = spec.field_config()
    aperture = spec.aperture()
    d_opt = sampling_distance(spec.width, spec.lobe_order)
    grid = DenseGrid.over(aperture, d_opt, spec.density)
    if spec.dim == 1:
        n_fft = 1 << (4 * grid.shape[0] - 1).bit_length()
    else:
        n_fft = grid.shape
    acc = None
    for t in range(spec.trials):
        field = draw_realization(fc, _rng.trial_seed(spec.seed, _rng.FIELD_STREAM, t))
        k_axes, psd = power_spectrum(evaluate_grid(field, *grid.axes), grid, n_fft)
        acc = psd if acc is None else acc + psd
    psd = acc / spec.trials
    _check_finite("psd", psd)
    if np.any(psd < 0):
        raise InvariantViolation("psd: negative value")
    kgrids = np.meshgrid(*k_axes, indexing="ij")
    names = ["k_x", "k_y"][: spec.dim]
    rows = zip(*(g.ravel() for g in kgrids), psd.ravel())
    extra = [("carrier_wavenumber", _fmt(fc.wavenumber))]
    for d in spec.lobe_orders:
        extra.append((f"half_sampling_wavenumber_d{d}", _fmt(math.pi / sampling_distance(spec.width, d))))
    path = os.path.join(out, f"{spec.kind}.csv")
    _write_csv(path, spec, [*names, "psd"], rows, extra)
    in_band = np.ones(psd.shape, dtype=bool)
    for g in kgrids:
        in_band &= np.abs(g) <= fc.wavenumber
    fraction = float(psd[in_band].sum() / psd.sum())
    return [path], {"in_band_fraction": fraction}


# --- pilots -------------------------------------------------------------------

_CI_CHUNK = 20_000


def _ci_point(task):
    seed, point, z_p, snr, eps, trials = task
    pilot = PilotConfig(z_p=z_p, snr=snr)
    q = pilot_sequence(pilot)
    rng = _rng.generator(_rng.child(seed, _rng.CI_STREAM, point))
    hits = 0
    errors_re = []
    done = 0
    while done < trials:
        n = min(_CI_CHUNK, trials - done)
        h = np.ones(n, dtype=complex)
        err = mle_estimate(simulate_pilots(h, pilot, rng), q) - h
        hits += int(np.count_nonzero(np.abs(err.real) < eps))
        errors_re.append(err.real)
        done += n
    e = np.concatenate(errors_re)
    return hits / trials, float(e.mean()), float(e.var())


def _ci_validate(spec: ExperimentSpec, out: str):
    tasks, meta = [], []
    for s in spec.snr_db_values:
        for z in spec.z_p_values:
            tasks.append((spec.seed, len(tasks), int(z), db_to_linear(s), spec.epsilon, spec.trials))
            meta.append((s, int(z)))
    results = _parallel_map(_ci_point, tasks, spec.jobs)
    rows, gaps = [], []
    for (s, z), (emp, bias, var) in zip(meta, results):
        analytic = float(ci_probability(spec.epsilon, z, db_to_linear(s)))
        if not (0.0 <= analytic <= 1.0 and 0.0 <= emp <= 1.0):
            raise InvariantViolation("ci: probability outside [0, 1]")
        gaps.append(abs(emp - analytic))
        rows.append([spec.epsilon, z, s, analytic, emp, emp - analytic, bias, var,
                     1.0 / (z * db_to_linear(s)), spec.trials])
    summary = {"max_abs_gap": max(gaps), "min_pilots": {}}
    ci = CiSpec(spec.epsilon, spec.gamma)
    for s in spec.snr_db_values:
        found = min_pilots(ci, db_to_linear(s))
        if found != min_pilots_closed_form(ci, db_to_linear(s)):
            raise InvariantViolation("min_pilots search disagrees with the closed form")
        summary["min_pilots"][_fmt(s)] = found
    path = os.path.join(out, f"{spec.kind}.csv")
    _write_csv(path, spec, ["epsilon", "z_p", "snr_db", "analytic_ci", "empirical_ci", "ci_gap",
                            "error_mean", "error_variance", "analytic_variance", "trials"], rows)
    return [path], summary


# --- rates --------------------------------------------------------------------


def _rates(spec: ExperimentSpec, out: str):
    sweep, values = ("z_p", spec.z_p_values) if spec.kind == "rate-vs-zp" else ("width", spec.widths)
    points = monte_carlo_rates(
        sweep, values,
        field_config=spec.field_config(),
        rate_config=spec.rate_config(),
        dim=spec.dim, width=spec.width, lobe_order=spec.lobe_order,
        density=spec.density, trials=spec.trials, seed=spec.seed, jobs=spec.jobs,
    )
    b = spec.bandwidth
    rows = []
    for p in points:
        if not p.dominance_ok:
            raise InvariantViolation(f"rate ordering violated at {sweep}={p.value}")
        rows.append([p.sweep_var, p.value, p.trials,
                     p.fas_perfect_mean, p.fas_imperfect_mean, p.tas_mean,
                     p.fas_perfect_stderr, p.fas_imperfect_stderr, p.tas_stderr,
                     p.fas_perfect_mean / b, p.fas_imperfect_mean / b, p.tas_mean / b,
                     p.n_samples, p.pilot_symbols, p.data_symbols, p.budget_feasible])
    path = os.path.join(out, f"{spec.kind}.csv")
    _write_csv(path, spec, [
        "sweep_var", "value", "trials",
        "rate_fas_perfect_mean", "rate_fas_imperfect_mean", "rate_tas_mean",
        "rate_fas_perfect_stderr", "rate_fas_imperfect_stderr", "rate_tas_stderr",
        "se_fas_perfect_mean", "se_fas_imperfect_mean", "se_tas_mean",
        "n_samples", "pilot_symbols", "data_symbols", "budget_feasible",
    ], rows)
    best = max(points, key=lambda p: p.fas_imperfect_mean)
    return [path], {"best_value": best.value, "best_rate_fas_imperfect": best.fas_imperfect_mean}


_RUNNERS = {
    "recon-demo-1d": _recon_demo,
    "recon-demo-2d": _recon_demo,
    "spectrum": _spectrum,
    "sweep-distance": _sweep_distance,
    "sweep-width": _sweep_width,
    "ci-validate": _ci_validate,
    "rate-vs-zp": _rates,
    "rate-vs-width": _rates,
}


def run(spec: ExperimentSpec) -> dict:
    """Run ``spec`` and write its CSVs and JSON sidecar into ``spec.out``.

    Returns the sidecar content. Raises :class:`InvariantViolation` when a
    result breaks an exact property; nothing is written in that case.
    """
    os.makedirs(spec.out, exist_ok=True)
    files, summary = _RUNNERS[spec.kind](spec, spec.out)
    resolved = asdict(spec)
    resolved["snr"] = spec.snr
    sidecar = {
        "experiment": spec.kind,
        "seed": spec.seed,
        "spec": resolved,
        "files": [os.path.basename(f) for f in files],
        "summary": summary,
    }
    with open(os.path.join(spec.out, f"{spec.kind}.json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
