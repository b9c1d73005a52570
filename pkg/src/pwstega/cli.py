"""Command-line front end.

The password is read from ``$STEGA_PASSWORD`` or an interactive prompt, never
from argv.
"""

from __future__ import annotations

import argparse
import getpass
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .images import load_image, save_jpeg, save_png
from .pipeline import (
    CATEGORIES,
    StageError,
    StegoConfig,
    attack_recover_no_password,
    attack_recover_wrong_password,
    hide,
    public_metadata,
    recover,
    reference_image,
)

PASSWORD_ENV = "STEGA_PASSWORD"
log = logging.getLogger("pwstega")


class UsageError(Exception):
    pass


def read_password(env: str = PASSWORD_ENV, prompt: str = "password: ") -> str:
    value = os.environ.get(env)
    if value:
        return value
    if sys.stdin is not None and sys.stdin.isatty():
        value = getpass.getpass(prompt)
        if value:
            return value
    raise UsageError(f"no password available: set ${env} or run interactively")


def _shared(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="YAML or JSON file with StegoConfig fields")
    g.add_argument("--backend", choices=("toy", "pretrained"), default=None)
    g.add_argument("--model-a", dest="model_a")
    g.add_argument("--model-b", dest="model_b")
    g.add_argument("--refgen-model", dest="refgen_model")
    g.add_argument("--steps", dest="T", type=int)
    g.add_argument("--xi", type=float)
    g.add_argument("--eta", type=float)
    g.add_argument("--mix", dest="p", type=float)
    g.add_argument("--ip-weight", dest="image_prompt_weight", type=float)
    g.add_argument("--guidance-scale", dest="guidance_scale", type=float)
    g.add_argument("--dtype", choices=("float32", "float64"))
    g.add_argument("--category", choices=CATEGORIES)
    g.add_argument("--control", type=Path)
    g.add_argument("--control-type", choices=("seg", "pose"))
    g.add_argument("--size", type=int, help="center-crop and resize inputs to SIZE x SIZE")
    g.add_argument("--out", type=Path)
    g.add_argument("--save-ref", type=Path, help="write the reference image here (SECRET material)")
    g.add_argument("--audit", type=Path, help="private audit JSON; must live outside the output directory")
    g.add_argument("-v", "--verbose", action="store_true")


OVERRIDES = ("model_a", "model_b", "refgen_model", "T", "xi", "eta", "p", "image_prompt_weight", "guidance_scale", "dtype")


def build_config(args, base: dict | None = None) -> StegoConfig:
    data = dict(base or {})
    if args.config is not None:
        loaded = yaml.safe_load(args.config.read_text()) or {}
        if not isinstance(loaded, dict):
            raise UsageError(f"{args.config}: expected a mapping")
        data.update(loaded)
    backend = args.backend or data.pop("backend", None) or "pretrained"
    cfg = StegoConfig.toy(**data) if backend == "toy" else StegoConfig.from_dict(data)
    category = getattr(args, "category", None)
    if category:
        cfg = cfg.for_category(category)
    overrides = {k: getattr(args, k) for k in OVERRIDES if getattr(args, k, None) is not None}
    return replace(cfg, **overrides) if overrides else cfg


def _size(args, cfg: StegoConfig):
    """Explicit --size, else 512 for real checkpoints and native size for toy models."""
    if args.size is not None:
        return args.size
    return None if cfg.model_a.startswith("toy:") else 512


def _control(args, cfg):
    if args.control is None:
        return None, None
    if args.control_type is None:
        raise UsageError("--control needs --control-type {seg,pose}")
    return load_image(args.control, _size(args, cfg)), args.control_type


def _check_audit_path(args):
    if args.audit is not None and args.out is not None:
        if args.audit.resolve().parent == args.out.resolve().parent:
            raise UsageError("--audit must be written outside the public output directory")


def _write_image(path: Path, img, allow_jpeg: bool = False):
    if path.suffix.lower() in (".jpg", ".jpeg"):
        if not allow_jpeg:
            raise UsageError("stego output must be lossless PNG; pass --allow-jpeg to override")
        return save_jpeg(path, img)
    return save_png(path.with_suffix(".png") if path.suffix.lower() != ".png" else path, img)


def _write_json(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _maybe_save_ref(args, password, prompt2, shape, cfg, ctrl, ctrl_type):
    if args.save_ref is not None:
        log.warning("writing the reference image to %s: treat it like the password", args.save_ref)
        save_png(args.save_ref, reference_image(password, prompt2, shape, cfg, ctrl, ctrl_type))


def cmd_hide(args) -> int:
    if args.out is None:
        raise UsageError("--out is required")
    _check_audit_path(args)
    password = read_password()
    cfg = build_config(args)
    image = load_image(args.image, _size(args, cfg))
    ctrl, ctrl_type = _control(args, cfg)
    result = hide(image, args.prompt2, password, cfg, ctrl, ctrl_type)
    out = _write_image(args.out, result.image, args.allow_jpeg)
    meta = public_metadata(result, args.prompt2, cfg, ctrl_type, args.category)
    meta["control_path"] = str(args.control) if args.control else None
    meta["size"] = _size(args, cfg)
    _write_json(args.metadata or out.with_suffix(".json"), meta)
    if args.audit is not None:
        _write_json(args.audit, result.audit)
    _maybe_save_ref(args, password, args.prompt2, image.shape, cfg, ctrl, ctrl_type)
    print(out)
    return 0


def _recovery_inputs(args):
    meta = {}
    if args.metadata is not None:
        meta = json.loads(args.metadata.read_text())
    prompt2 = args.prompt2 or meta.get("prompt2")
    if not prompt2:
        raise UsageError("--prompt2 or --metadata is required")
    cfg = build_config(args, meta.get("config"))
    if args.control is None and meta.get("control_path"):
        args.control = Path(meta["control_path"])
        args.control_type = args.control_type or meta.get("control_type")
    if args.size is None and meta.get("size"):
        args.size = meta["size"]
    return prompt2, cfg


def cmd_recover(args) -> int:
    if args.out is None:
        raise UsageError("--out is required")
    _check_audit_path(args)
    password = read_password()
    prompt2, cfg = _recovery_inputs(args)
    stego = load_image(args.image)
    ctrl, ctrl_type = _control(args, cfg)
    audit = json.loads(args.check_audit.read_text()) if args.check_audit else None
    result = recover(stego, prompt2, password, cfg, ctrl, ctrl_type, audit=audit)
    out = save_png(args.out, result.image)
    if args.audit is not None:
        _write_json(args.audit, result.audit)
    _maybe_save_ref(args, password, prompt2, stego.shape, cfg, ctrl, ctrl_type)
    print(out)
    return 0


def cmd_attack(args) -> int:
    if args.out is None:
        raise UsageError("--out is required")
    prompt2, cfg = _recovery_inputs(args)
    stego = load_image(args.image)
    ctrl, ctrl_type = _control(args, cfg)
    if args.mode == "none":
        result = attack_recover_no_password(stego, prompt2, cfg, ctrl, ctrl_type)
    else:
        if not args.wrong_password_env:
            raise UsageError("--mode wrong needs --wrong-password-env NAME")
        wrong = os.environ.get(args.wrong_password_env)
        if not wrong:
            raise UsageError(f"${args.wrong_password_env} is not set")
        result = attack_recover_wrong_password(stego, prompt2, wrong, cfg, ctrl, ctrl_type)
    print(save_png(args.out, result.image))
    return 0


def cmd_refgen(args) -> int:
    if args.out is None:
        raise UsageError("--out is required")
    password = read_password()
    cfg = build_config(args)
    ctrl, ctrl_type = _control(args, cfg)
    size = _size(args, cfg) or (ctrl.shape[1] if ctrl is not None else 512)
    log.warning("the reference image is secret material; do not publish %s", args.out)
    ref = reference_image(password, args.prompt2, (3, size, size), cfg, ctrl, ctrl_type)
    print(save_png(args.out, ref))
    return 0


def cmd_evaluate(args) -> int:
    from .evalkit.harness import RECOVERY_SCENARIOS, evaluate

    if args.out is None:
        raise UsageError("--out is required")
    password = read_password()
    cfg = build_config(args)
    scenarios = RECOVERY_SCENARIOS if args.scenarios == ["all"] else args.scenarios
    wrong = os.environ.get(args.wrong_password_env) if args.wrong_password_env else None
    report = evaluate(args.manifest, cfg, password, scenarios, args.degradations, wrong_password=wrong, image_size=_size(args, cfg), workers=args.workers)
    json_path, csv_path = report.write(args.out)
    print(json_path)
    print(csv_path)
    if report.failures:
        log.warning("%d of %d items failed", report.failures, len(report.items))
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(depth_sweep_path=args.depth_sweep)
    if args.depth_sweep is not None:
        print(f"depth sweep written to {args.depth_sweep}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwstega", description="Password-keyed coverless image steganography.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hide", help="hide an image inside a generated stego image")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--prompt2", required=True)
    p.add_argument("--metadata", type=Path, help="public metadata JSON (default: next to --out)")
    p.add_argument("--allow-jpeg", action="store_true", help="permit lossy stego output")
    _shared(p)
    p.set_defaults(func=cmd_hide)

    for name, func, help_ in (("recover", cmd_recover, "recover the hidden image"), ("attack", cmd_attack, "scripted recovery attacks")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--image", type=Path, required=True)
        p.add_argument("--prompt2")
        p.add_argument("--metadata", type=Path, help="public metadata written by hide")
        if name == "recover":
            p.add_argument("--check-audit", type=Path, help="hiding-side audit; fail on reference mismatch")
        else:
            p.add_argument("--mode", choices=("none", "wrong"), required=True)
            p.add_argument("--wrong-password-env", help="environment variable holding the wrong password")
        _shared(p)
        p.set_defaults(func=func)

    p = sub.add_parser("refgen", help="generate the (secret) reference image")
    p.add_argument("--prompt2", required=True)
    _shared(p)
    p.set_defaults(func=cmd_refgen)

    p = sub.add_parser("evaluate", help="batch evaluation over a JSONL manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--scenarios", nargs="+", default=["all"], choices=["all", "recover-correct", "recover-none", "recover-wrong"])
    p.add_argument("--degradations", nargs="*", default=[], choices=["gaussian_blur", "jpeg"])
    p.add_argument("--wrong-password-env")
    p.add_argument("--workers", type=int, default=1)
    _shared(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("selftest", help="run the toy-backend property suite")
    p.add_argument("--depth-sweep", type=Path, help="write drift-vs-depth CSV here")
    p.set_defaults(func=cmd_selftest, verbose=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
