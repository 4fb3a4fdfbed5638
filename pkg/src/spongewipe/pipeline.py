"""Dataset generation, preprocessing and persistence.

Three artifact families live on disk under one dataset directory:

    manifest.json        schema, seeds, per-file row counts and checksums
    norm_stats.json      min/max normalization stats (written by `fit`)
    unlabeled/*.csv      400x6 exploratory FT trajectories (offline filtered)
    demos/*.csv          25-step scripted expert demonstrations

CSV columns are fixed: trajectories are `t,fx,fy,fz,tx,ty,tz`; demos are
`t,x,y,dh,fx,fy,fz,tx,ty,tz`.  Floats are written with repr precision so a
round trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import butter, filtfilt, lfilter

from . import task
from .rng import Rng
from .sim import (
    EEState,
    OverloadFault,
    SimConfig,
    SpongeParams,
    SpongeSim,
    SurfaceProfile,
    run_exploratory,
    sample_randomized_params,
)

SCHEMA_VERSION = 1

EXPLORE_FILTER = {"order": 2, "cutoff_hz": 5.0, "fs_hz": 100.0}
DEMO_FILTER = {"order": 2, "cutoff_hz": 0.8, "fs_hz": 2.5}

TRAJ_COLUMNS = "t,fx,fy,fz,tx,ty,tz"
DEMO_COLUMNS = "t,x,y,dh,fx,fy,fz,tx,ty,tz"


class CorruptDatasetError(RuntimeError):
    pass


class DegenerateChannelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Filtering


def butterworth_lowpass(signal, order, cutoff_hz, fs_hz, causal):
    """Low-pass Butterworth; causal -> forward IIR, else forward-backward."""
    signal = np.asarray(signal, dtype=np.float64)
    if not 0.0 < cutoff_hz < fs_hz / 2.0:
        raise ValueError(
            f"cutoff {cutoff_hz} Hz must lie in (0, {fs_hz / 2}) (Nyquist)"
        )
    b, a = butter(order, cutoff_hz / (fs_hz / 2.0))
    if causal:
        return lfilter(b, a, signal)
    return filtfilt(b, a, signal)


class CausalFilter:
    """Streaming per-channel causal Butterworth (zero initial state)."""

    def __init__(self, order, cutoff_hz, fs_hz, channels):
        if not 0.0 < cutoff_hz < fs_hz / 2.0:
            raise ValueError("cutoff must lie below Nyquist")
        self.b, self.a = butter(order, cutoff_hz / (fs_hz / 2.0))
        self.zi = np.zeros((channels, max(len(self.a), len(self.b)) - 1))

    def push(self, sample):
        sample = np.asarray(sample, dtype=np.float64)
        out = np.empty_like(sample)
        for c in range(sample.shape[0]):
            y, self.zi[c] = lfilter(self.b, self.a, [sample[c]], zi=self.zi[c])
            out[c] = y[0]
        return out


def filter_trajectory(samples, causal=False, **kw):
    """Filter each of the six FT channels of a (T, 6) array."""
    params = dict(EXPLORE_FILTER)
    params.update(kw)
    out = np.empty_like(samples)
    for c in range(samples.shape[1]):
        out[:, c] = butterworth_lowpass(
            samples[:, c], params["order"], params["cutoff_hz"],
            params["fs_hz"], causal,
        )
    return out


# ---------------------------------------------------------------------------
# Normalization

NORM_LO, NORM_HI = 0.0, 0.9


@dataclass(frozen=True)
class MinMax:
    lo: np.ndarray
    hi: np.ndarray

    def _check(self):
        if np.any(self.hi <= self.lo):
            raise DegenerateChannelError("max must exceed min on used channels")

    def normalize(self, x):
        self._check()
        x = np.asarray(x, dtype=np.float64)
        y = NORM_HI * (x - self.lo) / (self.hi - self.lo)
        return np.clip(y, NORM_LO, NORM_HI)

    def denormalize(self, y):
        self._check()
        y = np.asarray(y, dtype=np.float64)
        return self.lo + np.asarray(y) * (self.hi - self.lo) / NORM_HI


@dataclass(frozen=True)
class NormStats:
    """Min/max per FT channel, plus xy and dh ranges when fitted on demos."""

    ft: MinMax
    xy: MinMax | None = None
    dh: MinMax | None = None

    def to_dict(self):
        def mm(m):
            return None if m is None else {
                "lo": np.atleast_1d(m.lo).tolist(),
                "hi": np.atleast_1d(m.hi).tolist(),
            }

        return {"ft": mm(self.ft), "xy": mm(self.xy), "dh": mm(self.dh)}

    @classmethod
    def from_dict(cls, d):
        def mm(obj):
            if obj is None:
                return None
            return MinMax(np.array(obj["lo"]), np.array(obj["hi"]))

        return cls(ft=mm(d["ft"]), xy=mm(d["xy"]), dh=mm(d["dh"]))


def fit_norm_stats(ft_arrays, xy_arrays=None, dh_arrays=None) -> NormStats:
    """Per-channel min/max over stacked training arrays."""
    ft = np.concatenate([np.asarray(a).reshape(-1, 6) for a in ft_arrays])
    stats_ft = MinMax(ft.min(axis=0), ft.max(axis=0))
    xy = dh = None
    if xy_arrays is not None:
        allxy = np.concatenate([np.asarray(a).reshape(-1, 2) for a in xy_arrays])
        xy = MinMax(allxy.min(axis=0), allxy.max(axis=0))
    if dh_arrays is not None:
        alldh = np.concatenate([np.asarray(a).reshape(-1) for a in dh_arrays])
        dh = MinMax(np.array(alldh.min()), np.array(alldh.max()))
    return NormStats(ft=stats_ft, xy=xy, dh=dh)


# ---------------------------------------------------------------------------
# Records


@dataclass
class FTTrajectory:
    samples: np.ndarray  # (400, 6)
    rate: float = 100.0
    sponge_name: str = ""
    filtered: bool = False
    normalized: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.shape != (400, 6):
            raise ValueError(f"trajectory must be 400x6, got {self.samples.shape}")


@dataclass
class Demonstration:
    xy: np.ndarray        # (25, 2) absolute x, y
    dh: np.ndarray        # (25,) vertical displacement from previous step
    ft: np.ndarray        # (25, 6), causally filtered
    rate: float = 2.5
    sponge_name: str = ""
    z_start: float = 0.0  # absolute z of the first commanded step

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=np.float64)
        self.dh = np.asarray(self.dh, dtype=np.float64)
        self.ft = np.asarray(self.ft, dtype=np.float64)
        if self.xy.shape != (25, 2) or self.dh.shape != (25,) \
                or self.ft.shape != (25, 6):
            raise ValueError("demonstration must have exactly 25 steps")
        if self.dh[0] != 0.0:
            raise ValueError("dh[0] must be 0")

    def z_abs(self):
        return self.z_start + np.cumsum(self.dh)


@dataclass
class DemoRecord:
    demo: Demonstration
    exploratory: FTTrajectory
    sponge: SpongeParams


# ---------------------------------------------------------------------------
# Scripted privileged expert


@dataclass(frozen=True)
class ExpertConfig:
    compression_frac: float = 0.5   # target compression as fraction of rest
    force_cap: float = 40.0         # N; compression target backed off to this
    gain: float = 0.8               # proportional gain in units of 1/k_eff
    perturb_sigma: float = 0.002    # m, exploration jitter on each dh
    dh_clip: float = 0.02           # m per control period
    approach_steps: int = 2         # unlogged settling updates at path start


def _target_compression(sponge: SpongeParams, cfg: ExpertConfig) -> float:
    """delta* = min(frac*rest, compression where |fz| hits the force cap)."""
    delta = cfg.compression_frac * sponge.rest_thickness
    f_at = sponge.k * delta * (1.0 + (delta / sponge.d) ** 2)
    if f_at <= cfg.force_cap:
        return delta
    lo, hi = 0.0, delta
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if sponge.k * mid * (1.0 + (mid / sponge.d) ** 2) > cfg.force_cap:
            hi = mid
        else:
            lo = mid
    return lo


def synth_demonstration(sponge: SpongeParams, profile: SurfaceProfile,
                        expert_cfg: ExpertConfig, rng: Rng,
                        sim_cfg: SimConfig | None = None,
                        path_phase: float = 0.0) -> Demonstration:
    """Run the privileged expert: hold target compression via a proportional
    loop on sensed fz while sweeping the wiping path."""
    sim_cfg = sim_cfg or SimConfig(seed=rng.seed)
    sim_cfg = replace(sim_cfg, dt=task.STEP_PERIOD)
    delta_star = _target_compression(sponge, expert_cfg)
    f_star = -sponge.k * delta_star * (1.0 + (delta_star / sponge.d) ** 2)
    k_eff = sponge.k * (1.0 + 3.0 * (delta_star / sponge.d) ** 2)
    alpha = expert_cfg.gain / k_eff

    for attempt in range(4):
        try:
            return _run_expert(
                sponge, profile, expert_cfg, rng.child(f"attempt{attempt}"),
                sim_cfg, path_phase, delta_star, f_star, alpha,
            )
        except OverloadFault:
            delta_star *= 0.5
            f_star = -sponge.k * delta_star * (1.0 + (delta_star / sponge.d) ** 2)
    raise OverloadFault("expert could not find a safe compression target")


def _run_expert(sponge, profile, cfg, rng, sim_cfg, path_phase,
                delta_star, f_star, alpha):
    path = task.wiping_path(path_phase)
    sim = SpongeSim(sponge, profile, sim_cfg, rng.child("sim"))
    filt = CausalFilter(channels=6, **DEMO_FILTER)
    noise = rng.child("perturb")
    x0, y0 = path[0]
    z = sim.touch_height(x0, y0)

    def correction(fz):
        return float(np.clip(-alpha * (fz - f_star), -cfg.dh_clip, cfg.dh_clip))

    for _ in range(cfg.approach_steps):
        raw = sim.step(EEState((x0, y0, z)))
        filt.push(raw.as_array())
        z += correction(raw.fz)

    zs = np.empty(25)
    ft = np.empty((25, 6))
    for t in range(25):
        x, y = path[t]
        zs[t] = z
        raw = sim.step(EEState((x, y, z)))
        ft[t] = filt.push(raw.as_array())
        if t < 24:
            ff = profile.height(*path[t + 1]) - profile.height(x, y)
            dh = ff + correction(raw.fz) + float(noise.normal(0, cfg.perturb_sigma))
            z += float(np.clip(dh, -cfg.dh_clip, cfg.dh_clip))
    dh = np.concatenate([[0.0], np.diff(zs)])
    return Demonstration(xy=path.copy(), dh=dh, ft=ft,
                         sponge_name=sponge.name, z_start=zs[0])


def build_demo_windows(demo: Demonstration, window: int):
    """(ft window ending at t, dh at t+1) pairs; left zero-padded raw rows."""
    if window < 1:
        raise ValueError("window must be >= 1")
    pairs = []
    for t in range(len(demo.dh) - 1):
        rows = np.zeros((window, 6))
        lo = max(0, t - window + 1)
        chunk = demo.ft[lo:t + 1]
        rows[window - len(chunk):] = chunk
        pairs.append((rows, float(demo.dh[t + 1])))
    return pairs


# ---------------------------------------------------------------------------
# Training sponges

_SPREAD_ORDER = [0, 11, 5, 8, 2, 9, 3, 6, 1, 10, 4, 7]


def make_training_sponges(n: int):
    """Deterministic training sponges spanning the randomization ranges.

    Drawn from a fixed master list of 12 whose prefix of any length still
    spreads across stiffness decades, so the demo-count ablation reuses the
    same family.
    """
    if not 1 <= n <= 12:
        raise ValueError("supported training demo counts are 1..12")
    ks = np.exp(np.linspace(np.log(60.0), np.log(900.0), 12))
    mus = np.linspace(0.4, 3.0, 12)
    ds = np.linspace(0.05, 0.25, 12)
    out = []
    for i, idx in enumerate(_SPREAD_ORDER[:n]):
        out.append(SpongeParams(
            mu=float(mus[(idx * 5) % 12]),
            k=float(ks[idx]),
            d=float(ds[(idx * 7) % 12]),
            name=f"train{i}",
        ))
    return out


# ---------------------------------------------------------------------------
# Generation

NOMINAL_FLAT = SurfaceProfile(kind="flat", base_height=0.0)


def gen_unlabeled_sim(n: int, cfg: SimConfig, rng: Rng):
    """n randomized sponges, one exploratory run each on the nominal flat
    surface; trajectories come back offline-filtered."""
    if n < 1:
        raise ValueError("need n >= 1")
    trajectories, params = [], []
    draws = rng.child("params")
    i = 0
    while len(trajectories) < n:
        sponge = sample_randomized_params(draws)
        try:
            raw = run_exploratory(
                sponge, NOMINAL_FLAT, replace(cfg, seed=rng.seed),
                rng.child(f"traj{i}"),
            )
        except OverloadFault:
            i += 1
            continue  # resample this sponge
        filtered = filter_trajectory(raw, causal=False)
        trajectories.append(FTTrajectory(filtered, sponge_name=f"sim{len(params)}",
                                         filtered=True))
        params.append(sponge)
        i += 1
    return trajectories, params


def gen_demo_records(sponges, rng: Rng, profile: SurfaceProfile | None = None,
                     expert_cfg: ExpertConfig | None = None,
                     sim_cfg: SimConfig | None = None):
    """One expert demonstration + one exploratory run per sponge."""
    profile = profile or task.DEMO_PROFILE
    expert_cfg = expert_cfg or ExpertConfig()
    sim_cfg = sim_cfg or SimConfig()
    records = []
    for i, sponge in enumerate(sponges):
        sub = rng.child(f"demo{i}")
        phase = float(sub.child("phase").uniform(-0.15, 0.15))
        demo = synth_demonstration(sponge, profile, expert_cfg,
                                   sub.child("expert"), sim_cfg, phase)
        demo.sponge_name = sponge.name
        raw = run_exploratory(sponge, NOMINAL_FLAT, sim_cfg, sub.child("explore"))
        tau = FTTrajectory(filter_trajectory(raw, causal=False),
                           sponge_name=sponge.name, filtered=True)
        records.append(DemoRecord(demo=demo, exploratory=tau, sponge=sponge))
    return records


# ---------------------------------------------------------------------------
# Persistence


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header: str, rows: np.ndarray):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_csv(path: Path, header: str) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != header:
            raise CorruptDatasetError(f"{path}: unexpected header {first!r}")
        rows = [
            [float(v) for v in line.strip().split(",")]
            for line in fh
            if line.strip()
        ]
    return np.array(rows, dtype=np.float64)


def _sponge_dict(s: SpongeParams):
    return {"mu": s.mu, "k": s.k, "d": s.d,
            "rest_thickness": s.rest_thickness, "name": s.name}


def _sponge_from(d):
    return SpongeParams(**d)


def save_dataset(root, trajectories=None, params=None, records=None,
                 stats: NormStats | None = None, seeds=None, config=None):
    """Write the directory layout + manifest; returns the manifest dict."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    files = []

    def register(path, rows):
        files.append({
            "path": str(path.relative_to(root)),
            "rows": int(rows),
            "sha256": _sha256(path),
        })

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seeds": seeds or {},
        "config_hash": hashlib.sha256(
            json.dumps(config or {}, sort_keys=True).encode()
        ).hexdigest(),
        "counts": {},
        "files": [],
        "unlabeled_params": [],
        "demo_meta": [],
    }

    if trajectories is not None:
        (root / "unlabeled").mkdir(exist_ok=True)
        for i, traj in enumerate(trajectories):
            path = root / "unlabeled" / f"traj_{i:04d}.csv"
            t = np.arange(traj.samples.shape[0]) / traj.rate
            _write_csv(path, TRAJ_COLUMNS,
                       np.column_stack([t, traj.samples]))
            register(path, traj.samples.shape[0])
        manifest["counts"]["unlabeled"] = len(trajectories)
        manifest["unlabeled_params"] = [_sponge_dict(p) for p in params]

    if records is not None:
        (root / "demos").mkdir(exist_ok=True)
        for i, rec in enumerate(records):
            demo = rec.demo
            path = root / "demos" / f"demo_{i:02d}.csv"
            t = np.arange(25) / demo.rate
            _write_csv(path, DEMO_COLUMNS, np.column_stack(
                [t, demo.xy, demo.dh, demo.ft]))
            register(path, 25)
            epath = root / "demos" / f"explore_{i:02d}.csv"
            te = np.arange(400) / rec.exploratory.rate
            _write_csv(epath, TRAJ_COLUMNS,
                       np.column_stack([te, rec.exploratory.samples]))
            register(epath, 400)
            manifest["demo_meta"].append({
                "sponge": _sponge_dict(rec.sponge),
                "z_start": demo.z_start,
            })
        manifest["counts"]["demos"] = len(records)

    if stats is not None:
        (root / "norm_stats.json").write_text(json.dumps(stats.to_dict()))

    manifest["files"] = files
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest


def load_dataset(root):
    """Validate the manifest and reload everything it references."""
    root = Path(root)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise CorruptDatasetError(f"no manifest at {mpath}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise CorruptDatasetError(
            f"unsupported dataset schema {manifest.get('schema_version')!r}"
        )
    for entry in manifest["files"]:
        path = root / entry["path"]
        if not path.exists():
            raise CorruptDatasetError(f"missing file {path}")
        if _sha256(path) != entry["sha256"]:
            raise CorruptDatasetError(f"checksum mismatch for {path}")

    trajectories, params, records = [], [], []
    n_unlabeled = manifest["counts"].get("unlabeled", 0)
    for i in range(n_unlabeled):
        data = _read_csv(root / "unlabeled" / f"traj_{i:04d}.csv", TRAJ_COLUMNS)
        if data.shape[0] != 400:
            raise CorruptDatasetError(f"trajectory {i} has {data.shape[0]} rows")
        trajectories.append(FTTrajectory(data[:, 1:], filtered=True,
                                         sponge_name=f"sim{i}"))
        params.append(_sponge_from(manifest["unlabeled_params"][i]))

    n_demos = manifest["counts"].get("demos", 0)
    for i in range(n_demos):
        data = _read_csv(root / "demos" / f"demo_{i:02d}.csv", DEMO_COLUMNS)
        if data.shape[0] != 25:
            raise CorruptDatasetError(f"demo {i} has {data.shape[0]} rows")
        meta = manifest["demo_meta"][i]
        sponge = _sponge_from(meta["sponge"])
        demo = Demonstration(xy=data[:, 1:3], dh=data[:, 3], ft=data[:, 4:10],
                             sponge_name=sponge.name, z_start=meta["z_start"])
        edata = _read_csv(root / "demos" / f"explore_{i:02d}.csv", TRAJ_COLUMNS)
        tau = FTTrajectory(edata[:, 1:], filtered=True, sponge_name=sponge.name)
        records.append(DemoRecord(demo=demo, exploratory=tau, sponge=sponge))

    stats = None
    spath = root / "norm_stats.json"
    if spath.exists():
        stats = NormStats.from_dict(json.loads(spath.read_text()))
    return {
        "manifest": manifest,
        "trajectories": trajectories,
        "params": params,
        "records": records,
        "stats": stats,
    }
