"""Monte Carlo benchmark harness for the estimator family.

Runs seeded, reproducible trial batches over SNR, snapshot-count, source-
count, or resolution sweeps; computes assignment-based direction errors,
detection and resolution probabilities; and writes deterministic CSV
records plus a JSON manifest (config hash, seeds, library versions).
Wall-clock timings go to the manifest only, so record and summary files
are byte-identical across reruns.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import __version__ as _pkg_version
from .baselines import dsr_estimate, music_spectrum, root_music, spatial_smooth
from .coarray import sample_covariance, to_super_resolution, virtualize
from .detection import csorte, sorte_eigen
from .geometry import ArrayGeometry, build_coprime
from .simulate import SourceScene, generate_snapshots
from .superres import csr_estimate

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "assignment_error",
    "is_resolved",
    "run_accuracy_sweep",
    "run_detection_sweep",
    "run_resolution",
    "export_spectrum",
]

KNOWN_METHODS = ("csr", "dsr", "music", "root-music", "csorte", "sorte-eig")

VI_SCENE_SINES = (
    -0.8876, -0.7624, -0.6326, -0.5096, -0.3818, -0.2552, -0.1324,
    -0.0046, 0.1206, 0.2414, 0.3692, 0.4972, 0.6208, 0.7454, 0.8704,
)


@dataclass
class ExperimentConfig:
    """Full description of one benchmark experiment.

    Sources all share unit power; the noise power is ``10**(-snr_db/10)``,
    so quoted absolute noise-ball radii keep their meaning across SNR.

    ``eps_policy`` is either ``{"kind": "absolute", "epsilon": e,
    "epsilon_d": ed}`` or ``{"kind": "noise-scaled", "epsilon_mult": m,
    "epsilon_d_mult": md}`` with multipliers applied to the true noise
    power.

    The scene is either the explicit ``doas`` list, or (when ``doas`` is
    None) ``n_sources`` directions equally spaced over
    ``[-doa_span, doa_span]`` in ``sin(theta)``.
    """

    M: int = 3
    N: int = 5
    d_over_lambda: float = 0.5
    doas: tuple[float, ...] | None = VI_SCENE_SINES
    n_sources: int | None = None
    doa_span: float = 0.92
    snr_db: float = -10.0
    T: int = 500
    methods: tuple[str, ...] = ("csr", "dsr", "root-music")
    eps_policy: dict = field(default_factory=lambda: {
        "kind": "absolute", "epsilon": 5.0, "epsilon_d": 10.0})
    trials: int = 20
    base_seed: int = 12345
    combine: str = "average"
    dsr_grid_step: float = 0.005
    resolution_tol_deg: float = 0.3

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.methods:
            raise ValueError("method list must be nonempty")
        unknown = set(self.methods) - set(KNOWN_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        kind = self.eps_policy.get("kind")
        if kind == "absolute":
            needed = ("epsilon", "epsilon_d")
        elif kind == "noise-scaled":
            needed = ("epsilon_mult", "epsilon_d_mult")
        else:
            raise ValueError("eps_policy.kind must be 'absolute' or "
                             "'noise-scaled'")
        for key in needed:
            if key not in self.eps_policy:
                raise ValueError(f"eps_policy missing {key!r}")
        if self.doas is None and not self.n_sources:
            raise ValueError("give either doas or n_sources")

    # -- derived pieces -----------------------------------------------
    def geometry(self) -> ArrayGeometry:
        return build_coprime(self.M, self.N, self.d_over_lambda)

    @property
    def noise_power(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    def scene(self, n_sources: int | None = None) -> SourceScene:
        if self.doas is not None and n_sources is None:
            doas = tuple(self.doas)
        else:
            k = n_sources if n_sources is not None else self.n_sources
            doas = tuple(np.linspace(-self.doa_span, self.doa_span, k))
        return SourceScene(
            doas=doas,
            powers=tuple(1.0 for _ in doas),
            noise_power=self.noise_power,
        )

    def epsilons(self) -> tuple[float, float]:
        p = self.eps_policy
        if p["kind"] == "absolute":
            return float(p["epsilon"]), float(p["epsilon_d"])
        return (float(p["epsilon_mult"]) * self.noise_power,
                float(p["epsilon_d_mult"]) * self.noise_power)

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["doas"] = None if self.doas is None else list(self.doas)
        doc["methods"] = list(self.methods)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if doc.get("doas") is not None:
            doc["doas"] = tuple(doc["doas"])
        if "methods" in doc:
            doc["methods"] = tuple(doc["methods"])
        return cls(**doc)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_json_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()


def _trial_seed(base_seed: int, grid_index: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=base_seed,
                                spawn_key=(grid_index, trial))
    return int(ss.generate_state(1)[0])


def assignment_error(est_doas, true_doas) -> dict:
    """Minimum-cost matching of estimates to truth in ``sin(theta)``.

    Returns the mean absolute error over matched pairs plus the unmatched
    counts; misses and extras are reported separately rather than folded
    into the mean.
    """
    est = np.sort(np.asarray(est_doas, dtype=float))
    tru = np.asarray(true_doas, dtype=float)
    if est.size == 0:
        return {"mean_abs_err": float("nan"), "n_matched": 0,
                "n_missed": int(tru.size), "n_extra": 0}
    cost = np.abs(est[None, :] - tru[:, None])
    ri, ci = linear_sum_assignment(cost)
    matched = cost[ri, ci]
    return {
        "mean_abs_err": float(matched.mean()),
        "n_matched": int(matched.size),
        "n_missed": int(tru.size - matched.size),
        "n_extra": int(est.size - matched.size),
    }


def is_resolved(est_doas, true_doas, tol_deg: float = 0.3) -> bool:
    """True when distinct estimates fall within ``tol_deg`` degrees of
    each true direction."""
    est = np.asarray(est_doas, dtype=float)
    if est.size < len(true_doas):
        return False
    est_deg = np.rad2deg(np.arcsin(np.clip(est, -1.0, 1.0)))
    true_deg = np.rad2deg(np.arcsin(np.clip(
        np.asarray(true_doas, dtype=float), -1.0, 1.0)))
    used: set[int] = set()
    for td in true_deg:
        cands = [(abs(ed - td), i) for i, ed in enumerate(est_deg)
                 if i not in used and abs(ed - td) <= tol_deg]
        if not cands:
            return False
        used.add(min(cands)[1])
    return True


@dataclass
class ExperimentResult:
    """Per-trial records plus aggregates, both recomputable from records."""

    config: ExperimentConfig
    sweep_name: str
    records: list[dict]
    aggregates: list[dict]
    timings: dict

    def write(self, prefix: str) -> list[str]:
        """Writes ``<prefix>_records.csv``, ``<prefix>_summary.csv`` and
        ``<prefix>_manifest.json``; returns the paths."""
        rec_path = f"{prefix}_records.csv"
        sum_path = f"{prefix}_summary.csv"
        man_path = f"{prefix}_manifest.json"
        rec_cols = ["sweep", "grid_value", "trial", "method", "k_true",
                    "k_hat", "n_est", "mean_abs_err", "n_matched",
                    "n_missed", "n_extra", "resolved", "noise_power_est",
                    "est_doas", "error"]
        with open(rec_path, "w") as fh:
            fh.write(",".join(rec_cols) + "\n")
            for rec in self.records:
                fh.write(",".join(_fmt(rec.get(c)) for c in rec_cols)
                         + "\n")
        agg_cols = ["sweep", "grid_value", "method", "trials",
                    "mean_err", "median_err", "detection_prob",
                    "resolution_prob"]
        with open(sum_path, "w") as fh:
            fh.write(",".join(agg_cols) + "\n")
            for row in self.aggregates:
                fh.write(",".join(_fmt(row.get(c)) for c in agg_cols)
                         + "\n")
        manifest = {
            "config": self.config.to_json_dict(),
            "config_sha256": self.config.config_hash(),
            "sweep": self.sweep_name,
            "versions": {
                "coprimedoa": _pkg_version,
                "numpy": np.__version__,
            },
            "timings_s": self.timings,
        }
        with open(man_path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return [rec_path, sum_path, man_path]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if np.isnan(v):
            return "nan"
        return f"{v:.12g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(f"{x:.12g}" for x in v)
    return str(v)


def _run_methods(cfg: ExperimentConfig, scene: SourceScene, seed: int,
                 timings: dict) -> dict[str, dict]:
    """One trial: simulate once, run every requested method."""
    geom = cfg.geometry()
    X = generate_snapshots(geom, scene, cfg.T, seed)
    R = sample_covariance(X)
    z = virtualize(R, geom, cfg.combine)
    vm = to_super_resolution(z, cfg.d_over_lambda)
    eps, eps_d = cfg.epsilons()
    k_true = scene.n_sources
    out: dict[str, dict] = {}
    spectrum = None
    smoothed = None

    def timed(name, fn):
        t0 = time.perf_counter()
        res = fn()
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0
        return res

    for method in cfg.methods:
        try:
            if method == "csr":
                if spectrum is None:
                    spectrum = timed("csr",
                                     lambda: csr_estimate(vm, eps, eps_d))
                out["csr"] = {"doas": list(spectrum.doas),
                              "noise_power_est": spectrum.noise_power_est}
            elif method == "dsr":
                est = timed("dsr", lambda: dsr_estimate(
                    vm, eps_d, grid_step=cfg.dsr_grid_step))
                out["dsr"] = {"doas": list(est.doas),
                              "noise_power_est": est.noise_power_est}
            elif method in ("music", "root-music"):
                if smoothed is None:
                    smoothed = spatial_smooth(z)
                if method == "root-music":
                    doas = timed(method, lambda: list(root_music(
                        smoothed, k_true, cfg.d_over_lambda)))
                else:
                    grid = np.linspace(-1.0, 1.0, 2001)
                    spec = timed(method, lambda: music_spectrum(
                        smoothed, k_true, grid, cfg.d_over_lambda))
                    peaks = _peak_pick(grid, spec, k_true)
                    doas = list(peaks)
                out[method] = {"doas": doas}
            elif method == "csorte":
                if spectrum is None:
                    spectrum = timed("csr", lambda: csr_estimate(
                        vm, eps, eps_d))
                det = csorte(spectrum)
                out["csorte"] = {"k_hat": det.k_hat,
                                 "doas": _top_k_doas(spectrum, det.k_hat)}
            elif method == "sorte-eig":
                if smoothed is None:
                    smoothed = spatial_smooth(z)
                det = sorte_eigen(smoothed)
                out["sorte-eig"] = {"k_hat": det.k_hat}
        except Exception as exc:  # per-method failure is a record, not fatal
            out[method] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def _top_k_doas(spectrum, k: int) -> list[float]:
    """Directions of the k largest-amplitude unpruned candidates."""
    from .coarray import tau_to_doa
    order = np.argsort(spectrum.raw_amplitudes)[::-1][:k]
    doas = [tau_to_doa(float(spectrum.raw_taus[i]),
                       spectrum.d_over_lambda).sin_theta for i in order]
    return sorted(doas)


def _peak_pick(grid: np.ndarray, spec: np.ndarray, k: int) -> np.ndarray:
    inner = np.nonzero(
        (spec[1:-1] >= spec[:-2]) & (spec[1:-1] >= spec[2:]))[0] + 1
    order = inner[np.argsort(spec[inner])[::-1]]
    return np.sort(grid[order[:k]])


def _aggregate(records: list[dict], sweep: str) -> list[dict]:
    keys = sorted({(r["grid_value"], r["method"]) for r in records},
                  key=lambda kv: (kv[0], kv[1]))
    out = []
    for gv, method in keys:
        rows = [r for r in records
                if r["grid_value"] == gv and r["method"] == method]
        errs = np.array([r["mean_abs_err"] for r in rows], dtype=float)
        errs = errs[~np.isnan(errs)]
        k_ok = [r["k_hat"] == r["k_true"] for r in rows
                if r.get("k_hat") is not None]
        res = [bool(r["resolved"]) for r in rows
               if r.get("resolved") is not None]
        out.append({
            "sweep": sweep,
            "grid_value": gv,
            "method": method,
            "trials": len(rows),
            "mean_err": float(errs.mean()) if errs.size else float("nan"),
            "median_err": float(np.median(errs)) if errs.size
            else float("nan"),
            "detection_prob": float(np.mean(k_ok)) if k_ok else
            float("nan"),
            "resolution_prob": float(np.mean(res)) if res else
            float("nan"),
        })
    return out


def _sweep(cfg: ExperimentConfig, sweep_name: str, grid_values,
           cfg_for_value, scene_for_value) -> ExperimentResult:
    records: list[dict] = []
    timings: dict = {}
    for gi, gv in enumerate(grid_values):
        cfg_g = cfg_for_value(gv)
        scene = scene_for_value(cfg_g, gv)
        true_doas = np.asarray(scene.doas)
        for trial in range(cfg.trials):
            seed = _trial_seed(cfg.base_seed, gi, trial)
            results = _run_methods(cfg_g, scene, seed, timings)
            for method in cfg.methods:
                res = results.get(method, {})
                doas = res.get("doas")
                rec = {
                    "sweep": sweep_name,
                    "grid_value": gv,
                    "trial": trial,
                    "method": method,
                    "k_true": scene.n_sources,
                    "k_hat": res.get("k_hat"),
                    "n_est": None if doas is None else len(doas),
                    "resolved": None,
                    "noise_power_est": res.get("noise_power_est"),
                    "est_doas": doas,
                    "error": res.get("error"),
                }
                if doas is not None:
                    rec.update(assignment_error(doas, true_doas))
                    rec["resolved"] = is_resolved(
                        doas, true_doas, cfg.resolution_tol_deg)
                else:
                    rec.update({"mean_abs_err": float("nan"),
                                "n_matched": 0, "n_missed": 0,
                                "n_extra": 0})
                records.append(rec)
    return ExperimentResult(
        config=cfg,
        sweep_name=sweep_name,
        records=records,
        aggregates=_aggregate(records, sweep_name),
        timings={k: round(v, 3) for k, v in sorted(timings.items())},
    )


def run_accuracy_sweep(cfg: ExperimentConfig, snr_grid=None,
                       T_grid=None) -> ExperimentResult:
    """Direction-accuracy sweep over SNR or over snapshot count."""
    if (snr_grid is None) == (T_grid is None):
        raise ValueError("give exactly one of snr_grid or T_grid")
    if snr_grid is not None:
        from dataclasses import replace
        return _sweep(
            cfg, "snr_db", list(snr_grid),
            lambda gv: replace(cfg, snr_db=float(gv)),
            lambda c, gv: c.scene(),
        )
    from dataclasses import replace
    return _sweep(
        cfg, "T", list(T_grid),
        lambda gv: replace(cfg, T=int(gv)),
        lambda c, gv: c.scene(),
    )


def run_detection_sweep(cfg: ExperimentConfig, k_values) -> ExperimentResult:
    """Source-number detection probability over the source count."""
    from dataclasses import replace
    cfg_k = replace(cfg, doas=None,
                    n_sources=int(list(k_values)[0]))
    return _sweep(
        cfg_k, "n_sources", [int(k) for k in k_values],
        lambda gv: replace(cfg_k, n_sources=int(gv)),
        lambda c, gv: c.scene(int(gv)),
    )


def run_resolution(cfg: ExperimentConfig, snr_grid) -> ExperimentResult:
    """Resolution probability for a close source pair over SNR."""
    if cfg.doas is None or len(cfg.doas) != 2:
        raise ValueError("resolution experiment needs exactly two sources")
    from dataclasses import replace
    return _sweep(
        cfg, "snr_db", [float(s) for s in snr_grid],
        lambda gv: replace(cfg, snr_db=float(gv)),
        lambda c, gv: c.scene(),
    )


def export_spectrum(cfg: ExperimentConfig, method: str, path: str,
                    grid_step: float = 0.001) -> dict:
    """Writes plot-ready normalized spectrum data for one realization.

    For the gridless estimator the file holds the dual-polynomial modulus
    on a fine grid plus the spike list; for MUSIC the pseudospectrum; for
    DSR the on-grid amplitude profile.  Returns a small summary dict.
    """
    geom = cfg.geometry()
    scene = cfg.scene()
    seed = _trial_seed(cfg.base_seed, 0, 0)
    X = generate_snapshots(geom, scene, cfg.T, seed)
    z = virtualize(sample_covariance(X), geom, cfg.combine)
    vm = to_super_resolution(z, cfg.d_over_lambda)
    eps, eps_d = cfg.epsilons()
    grid = np.arange(-1.0, 1.0 + grid_step / 2, grid_step)
    spikes: list[tuple[float, float]] = []
    if method == "csr":
        from .superres import dual_polynomial
        est = csr_estimate(vm, eps, eps_d)
        taus = np.array([
            cfg.d_over_lambda * (1.0 - g) for g in grid])
        vals = np.abs(dual_polynomial(est.certificate.u, taus))
        spec = vals / max(vals.max(), 1e-300)
        spikes = [(s.sin_theta, s.amplitude) for s in est.spikes]
    elif method == "music":
        sm = spatial_smooth(z)
        spec = music_spectrum(sm, scene.n_sources, grid, cfg.d_over_lambda)
    elif method == "dsr":
        est = dsr_estimate(vm, eps_d, grid_step=cfg.dsr_grid_step)
        grid = est.raw_taus  # on-grid method: use its own grid
        grid = np.array([1.0 - t / cfg.d_over_lambda for t in grid])
        amax = est.raw_amplitudes.max(initial=1.0)
        spec = est.raw_amplitudes / max(amax, 1e-300)
        spikes = [(s.sin_theta, s.amplitude) for s in est.spikes]
    else:
        raise ValueError(f"no spectrum export for method {method!r}")
    with open(path, "w") as fh:
        fh.write("sin_theta,value\n")
        for g, v in zip(grid, spec):
            fh.write(f"{g:.12g},{v:.12g}\n")
    spike_path = None
    if spikes:
        spike_path = path.replace(".csv", "") + "_spikes.csv"
        with open(spike_path, "w") as fh:
            fh.write("sin_theta,amplitude\n")
            for s, a in spikes:
                fh.write(f"{s:.12g},{a:.12g}\n")
    return {"path": path, "spike_path": spike_path,
            "n_spikes": len(spikes), "n_grid": int(len(grid))}
