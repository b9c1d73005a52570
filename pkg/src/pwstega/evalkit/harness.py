"""Manifest-driven batch evaluation and table-style reports."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..backends import CONCURRENT_SAFE, get_backend
from ..images import load_image
from ..latentops import DTYPES
from ..pipeline import (
    CATEGORIES,
    StegoConfig,
    attack_recover_no_password,
    attack_recover_wrong_password,
    check_distinct_passwords,
    hide,
    recover,
)
from ..seedkit import Password
from .degrade import DEGRADATIONS
from .metrics import psnr, ssim
from .plugins import PluginRegistry, plugin_metric, registry

log = logging.getLogger(__name__)

RECOVERY_SCENARIOS = ("recover-correct", "recover-none", "recover-wrong")
SCENARIOS = ("encrypted",) + RECOVERY_SCENARIOS
NATIVE_METRICS = ("psnr", "ssim")
PAIR_PLUGINS = ("lpips", "id_sim")
TEXT_PLUGINS = ("clip",)

# the 17 numeric columns of the hiding/recovery comparison table
TABLE_COLUMNS = (
    [("encrypted", m) for m in ("psnr", "ssim", "lpips", "id_sim", "clip")]
    + [(s, m) for s in RECOVERY_SCENARIOS for m in ("psnr", "ssim", "lpips", "id_sim")]
)


@dataclass(frozen=True)
class ManifestItem:
    image_path: Path
    prompt2: str
    category: str = "content"
    control_path: Path | None = None
    control_type: str | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"category must be one of {CATEGORIES}, got {self.category!r}")
        if not self.prompt2:
            raise ValueError("prompt2 must be non-empty")
        if self.control_path is not None and self.control_type not in ("seg", "pose"):
            raise ValueError("items with a control image must state control_type 'seg' or 'pose'")


def load_manifest(path) -> list[ManifestItem]:
    """JSON lines; relative paths resolve against the manifest's directory."""
    path = Path(path)
    root = path.parent
    items = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            ctrl = rec.get("control_path")
            items.append(ManifestItem(
                image_path=root / rec["image_path"],
                prompt2=rec["prompt2"],
                category=rec.get("category", "content"),
                control_path=root / ctrl if ctrl else None,
                control_type=rec.get("control_type"),
            ))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad manifest entry: {exc}") from exc
    for item in items:
        if not item.image_path.exists():
            raise FileNotFoundError(f"manifest image not found: {item.image_path}")
        if item.control_path is not None and not item.control_path.exists():
            raise FileNotFoundError(f"manifest control image not found: {item.control_path}")
    return items


@dataclass
class MetricReport:
    items: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    scenarios: list[str] = field(default_factory=list)
    degradations: list[str] = field(default_factory=list)
    plugins: dict = field(default_factory=dict)
    config_hash: str = ""

    @property
    def failures(self) -> int:
        return sum(1 for it in self.items if it["status"] != "ok")

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "scenarios": self.scenarios,
            "degradations": self.degradations,
            "plugins": self.plugins,
            "counts": {"items": len(self.items), "succeeded": len(self.items) - self.failures, "failed": self.failures},
            "aggregate": self.aggregate,
            "items": self.items,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table_columns(self) -> list[tuple[str, str]]:
        """Native columns always; plugin columns only if some cell has a value."""
        cols = []
        for scen, metric in TABLE_COLUMNS:
            if scen not in self.scenarios:
                continue
            if metric in NATIVE_METRICS or any(
                (self.aggregate.get(d, {}).get(scen) or {}).get(metric) is not None for d in self.aggregate
            ):
                cols.append((scen, metric))
        return cols

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path = out_dir / "report.json"
        json_path.write_text(self.to_json() + "\n")
        csv_path = out_dir / "report.csv"
        cols = self.table_columns()
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["degradation"] + [f"{s}/{m}" for s, m in cols])
            for deg in ["clean"] + [d for d in self.degradations if d != "clean"]:
                row = self.aggregate.get(deg, {})
                cells = []
                for s, m in cols:
                    v = (row.get(s) or {}).get(m)
                    cells.append("" if v is None else f"{v:.3f}")
                writer.writerow([deg] + cells)
        return json_path, csv_path


def _score(ori, img, prompt2, scenario, plugins: PluginRegistry):
    out = {"psnr": psnr(ori, img), "ssim": ssim(ori, img)}
    for name in PAIR_PLUGINS:
        out[name] = plugin_metric(name, ori, img, plugins)
    if scenario == "encrypted":
        for name in TEXT_PLUGINS:
            out[name] = plugin_metric(name, img, prompt2, plugins)
    return out


def _recover_all(enc, item, ori, cfg, password, wrong, scenarios, ctrl, audit, plugins):
    res = {}
    for scen in scenarios:
        if scen == "recover-correct":
            img = recover(enc, item.prompt2, password, cfg, ctrl, item.control_type, audit=audit).image
        elif scen == "recover-none":
            img = attack_recover_no_password(enc, item.prompt2, cfg, ctrl, item.control_type).image
        else:
            img = attack_recover_wrong_password(enc, item.prompt2, wrong, cfg, ctrl, item.control_type).image
        res[scen] = _score(ori, img, item.prompt2, scen, plugins)
    return res


def _evaluate_item(index, item, cfg, password, wrong, scenarios, degradations, image_size, plugins):
    record = {"index": index, "image_path": str(item.image_path), "category": item.category, "prompt2": item.prompt2}
    try:
        icfg = cfg.for_category(item.category)
        ori = load_image(item.image_path, image_size)
        ctrl = load_image(item.control_path, image_size) if item.control_path else None
        hidden = hide(ori, item.prompt2, password, icfg, ctrl, item.control_type)
        enc = hidden.image
        metrics = {"clean": {"encrypted": _score(ori, enc, item.prompt2, "encrypted", plugins)}}
        metrics["clean"].update(_recover_all(enc, item, ori, icfg, password, wrong, scenarios, ctrl, hidden.audit, plugins))
        for deg in degradations:
            # recovered images are always scored against the original, not the degraded stego image
            metrics[deg] = _recover_all(DEGRADATIONS[deg](enc), item, ori, icfg, password, wrong, scenarios, ctrl, hidden.audit, plugins)
        record.update(status="ok", xi=icfg.xi, metrics=metrics)
    except Exception as exc:  # noqa: BLE001 - isolate per-item failures
        log.warning("item %d (%s) failed: %s", index, item.image_path, exc)
        record.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return record


def _value(cell):
    if isinstance(cell, dict):
        return cell["value"]
    return cell


def _aggregate(items, scenarios, degradations):
    ok = [it for it in items if it["status"] == "ok"]
    agg = {}
    for deg in ["clean"] + list(degradations):
        scen_list = (["encrypted"] if deg == "clean" else []) + list(scenarios)
        agg[deg] = {}
        for scen in scen_list:
            agg[deg][scen] = {}
            names = NATIVE_METRICS + PAIR_PLUGINS + (TEXT_PLUGINS if scen == "encrypted" else ())
            for name in names:
                vals = [_value(it["metrics"][deg][scen].get(name)) for it in ok]
                vals = [v for v in vals if v is not None]
                agg[deg][scen][name] = float(np.mean(vals)) if vals else None
    return agg


def evaluate(manifest, cfg: StegoConfig, password, scenarios=RECOVERY_SCENARIOS, degradations=(), wrong_password=None, image_size: int | None = 512, plugins: PluginRegistry | None = None, workers: int = 1) -> MetricReport:
    """Hide every manifest item, run the requested recoveries, score against the originals."""
    items = load_manifest(manifest) if isinstance(manifest, (str, Path)) else list(manifest)
    plugins = plugins or registry
    scenarios = [s for s in RECOVERY_SCENARIOS if s in set(scenarios)]
    unknown = set(degradations) - set(DEGRADATIONS)
    if unknown:
        raise ValueError(f"unknown degradations: {sorted(unknown)}")
    degradations = [d for d in DEGRADATIONS if d in set(degradations)]
    password = Password(password)
    wrong = Password(wrong_password) if wrong_password is not None else Password(password.secret + b"\x00wrong")
    check_distinct_passwords(password, wrong)
    report = MetricReport(scenarios=["encrypted"] + scenarios, degradations=degradations, plugins=plugins.versions(), config_hash=cfg.digest())
    if not items:
        log.warning("empty manifest: nothing to evaluate")
        report.aggregate = {}
        return report

    def job(pair):
        i, item = pair
        return _evaluate_item(i, item, cfg, password, wrong, scenarios, degradations, image_size, plugins)

    if workers > 1 and _concurrent_safe(cfg):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report.items = list(pool.map(job, enumerate(items)))
    else:
        report.items = [job(p) for p in enumerate(items)]
    report.aggregate = _aggregate(report.items, scenarios, degradations)
    return report


def _concurrent_safe(cfg: StegoConfig) -> bool:
    dtype = DTYPES[cfg.dtype]
    models = {cfg.model_a, cfg.model_b, cfg.style_model_b, cfg.refgen_model}
    return all(get_backend(m, dtype=dtype).concurrency == CONCURRENT_SAFE for m in models)
