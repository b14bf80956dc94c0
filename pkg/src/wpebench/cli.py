"""Command-line entry point: ``wpebench simulate | dereverb | evaluate | score``.

Exit codes: 0 success, 1 numerical failure, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import audio, features, losses, room, scoring, wpe
from .config import RunConfig, default_jobs, explicitly_set, load_run_config
from .errors import AlignmentError, NumericalError, WorkbenchError
from .stft import istft, stft

log = logging.getLogger("wpebench")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

MODES = ("wpe_single", "wpe_iterative", "vace")
MODE_TAPS = {"wpe_single": 30, "wpe_iterative": 30, "vace": 15}
MODE_PSD = {"wpe_single": "observed", "wpe_iterative": "iterative", "vace": "observed"}
METRICS = ("lsd", "srr", "l1", "l2", "ncs")
TARGETS = ("early_noisy", "early_clean")


class UsageError(WorkbenchError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _parallel_map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _require_files(paths):
    for p in paths:
        if not Path(p).is_file():
            raise UsageError(f"file not found: {p}")


# simulate

def parse_manifest(path, default_seed: int = 0) -> list:
    """Parse a JSON-lines manifest; relative paths resolve against the manifest's directory."""
    base = Path(path).parent
    rows, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise UsageError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in ("source", "rir", "noise", "snr_db") if k not in rec]
            if missing:
                raise UsageError(f"{path}:{lineno}: missing {', '.join(missing)}")
            try:
                snr = float(rec["snr_db"])
                seed = int(rec.get("seed", default_seed))
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from exc
            utt = str(rec.get("id", f"utt{len(rows):05d}"))
            if utt in seen or not utt or "/" in utt:
                raise UsageError(f"{path}:{lineno}: bad or duplicate id {utt!r}")
            seen.add(utt)
            entry = {"id": utt, "snr_db": snr, "seed": seed, "line": lineno}
            for key in ("source", "rir", "noise"):
                p = Path(rec[key])
                entry[key] = str(rec[key])
                entry[key + "_path"] = p if p.is_absolute() else base / p
                if not entry[key + "_path"].is_file():
                    raise UsageError(f"{path}:{lineno}: {key} file not found: {rec[key]}")
            rows.append(entry)
    return rows


def simulate_one(entry: dict, cfg: RunConfig, out_dir: Path) -> dict:
    source = audio.load_wav(entry["source_path"]).channel(0)
    rir = audio.load_wav(entry["rir_path"])
    noise = audio.load_wav(entry["noise_path"])
    bundle, _, _ = room.split_rir(rir, cfg.boundary_ms)
    obs = room.simulate(source, bundle, noise, entry["snr_db"], seed=entry["seed"])
    names = {}
    for name, sig in obs.components().items():
        fname = f"{entry['id']}_{name}.wav"
        audio.save_wav(sig, out_dir / fname, cfg.bit_depth)
        names[name] = fname
    record = {
        "id": entry["id"],
        "source": entry["source"],
        "rir": entry["rir"],
        "noise": entry["noise"],
        "seed": entry["seed"],
        "snr_db_requested": entry["snr_db"],
        "snr_db": obs.snr_db,
        "rir_stats": bundle.stats(),
        "components": names,
        "sample_rate": obs.observed.sample_rate,
        "num_samples": len(obs.observed),
    }
    (out_dir / f"{entry['id']}.json").write_text(_dumps(record) + "\n", encoding="utf-8")
    return record


def cmd_simulate(args, cfg: RunConfig) -> int:
    entries = parse_manifest(args.manifest, cfg.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _parallel_map(lambda e: simulate_one(e, cfg, out_dir), entries, cfg.jobs)
    log.info("simulated %d utterances into %s", len(entries), out_dir)
    return EXIT_OK


# dereverb

def _parse_taps(text):
    try:
        return [complex(t) if "j" in t else float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --virtual-taps {text!r}") from exc


def dereverb_one(path, cfg: RunConfig, mode: str, psd_path, virtual: dict, out_dir: Path) -> dict:
    start = time.perf_counter()
    sig = audio.load_wav(path).channel(0)
    Y = stft(sig, cfg.stft)
    psd = wpe.load_psd_file(psd_path) if psd_path else None
    if mode == "vace":
        V = wpe.virtual_channel_source(
            virtual["kind"], Y, path=virtual.get("path"), delay=virtual.get("delay", 0), taps=virtual.get("taps")
        )
        Z = wpe.vace_wpe(Y, V, cfg.wpe, psd=psd)
    else:
        Z = wpe.dereverberate(Y, cfg.wpe, psd=psd)
    out_path = out_dir / Path(path).name
    audio.save_wav(istft(Z), out_path, cfg.bit_depth)
    return {
        "input": str(path),
        "output": out_path.name,
        "seconds": round(time.perf_counter() - start, 4),
        "duration": sig.duration,
    }


def cmd_dereverb(args, cfg: RunConfig) -> int:
    inputs = list(args.inputs)
    _require_files(inputs)
    if len({Path(p).name for p in inputs}) != len(inputs):
        raise UsageError("input files must have distinct names")
    psd_files = args.psd or []
    if psd_files and len(psd_files) != len(inputs):
        raise UsageError("--psd needs one file per input")
    _require_files(psd_files)
    if psd_files and cfg.wpe.psd_mode != "external":
        raise UsageError("--psd requires psd_mode 'external'")
    if cfg.wpe.psd_mode == "external" and not psd_files:
        raise UsageError("psd_mode 'external' needs --psd files")
    if cfg.wpe.psd_mode == "oracle":
        raise UsageError("oracle PSD needs clean references; use the library API")
    virtual = {}
    virtual_files = args.virtual or []
    if args.mode == "vace":
        if not args.virtual_kind:
            raise UsageError("vace mode requires --virtual-kind")
        virtual = {"kind": args.virtual_kind, "delay": args.virtual_delay}
        if args.virtual_kind == "file":
            if len(virtual_files) != len(inputs):
                raise UsageError("--virtual-kind file needs one --virtual file per input")
            _require_files(virtual_files)
        if args.virtual_kind == "filtered_copy":
            if not args.virtual_taps:
                raise UsageError("filtered_copy needs --virtual-taps")
            virtual["taps"] = _parse_taps(args.virtual_taps)
    elif args.virtual_kind or virtual_files:
        raise UsageError("virtual channel flags only apply to vace mode")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(i):
        v = dict(virtual, path=virtual_files[i]) if virtual_files else virtual
        return dereverb_one(inputs[i], cfg, args.mode, psd_files[i] if psd_files else None, v, out_dir)

    rows = _parallel_map(work, list(range(len(inputs))), cfg.jobs)
    with open(out_dir / "dereverb_log.jsonl", "w", encoding="utf-8") as fh:
        fh.write(_dumps({"config": cfg.to_dict(), "mode": args.mode, "virtual": {k: str(v) for k, v in virtual.items()}}) + "\n")
        for row in rows:
            fh.write(_dumps(row) + "\n")
    log.info("dereverberated %d files into %s", len(rows), out_dir)
    return EXIT_OK


# evaluate

def evaluate_one(record_path: Path, processed_dir: Path, metrics, target: str, cfg: RunConfig) -> dict:
    rec = json.loads(record_path.read_text(encoding="utf-8"))
    utt = rec["id"]
    base = record_path.parent
    comp = {k: audio.load_wav(base / v).channel(0) for k, v in rec["components"].items()}
    proc_path = processed_dir / rec["components"]["observed"]
    if not proc_path.is_file():
        raise UsageError(f"{utt}: processed file missing: {proc_path}")
    z = audio.load_wav(proc_path).channel(0)
    ref = comp[target]
    if len(z) != len(ref):
        raise AlignmentError(f"{utt}: processed has {len(z)} samples, reference has {len(ref)}")
    row = {"id": utt}
    Z, R = stft(z, cfg.stft), stft(ref, cfg.stft)
    if "lsd" in metrics:
        row["lsd"] = losses.log_spectral_distance(Z, R)
        row["lsd_input"] = losses.log_spectral_distance(stft(comp["observed"], cfg.stft), R)
    if "srr" in metrics:
        row["srr"] = losses.oracle_snr(comp["early_clean"], z - comp["early_noisy"])
        row["srr_input"] = losses.oracle_snr(comp["early_clean"], comp["observed"] - comp["early_noisy"])
    if "l1" in metrics:
        row["l1"] = losses.l1_loss(Z, R, z, ref, cfg.pretrain)
    if "l2" in metrics:
        row["l2"] = losses.l2_loss(Z, R, z, ref, cfg.finetune)
    if "ncs" in metrics:
        row["ncs"] = losses.ncs_loss(features.toy_embedding(z), features.toy_embedding(ref))
    return row


def aggregate(rows) -> dict:
    keys = [k for k in rows[0] if k != "id"] if rows else []
    return {"id": "mean", **{k: float(np.mean([r[k] for r in rows])) for k in keys}}


def cmd_evaluate(args, cfg: RunConfig) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    bad = set(metrics) - set(METRICS)
    if bad or not metrics:
        raise UsageError(f"--metrics must be drawn from {','.join(METRICS)}")
    refs = [Path(p) for p in args.references]
    _require_files(refs)
    processed = Path(args.processed_dir)
    if not processed.is_dir():
        raise UsageError(f"processed directory not found: {processed}")
    rows = _parallel_map(lambda p: evaluate_one(p, processed, metrics, args.target, cfg), refs, cfg.jobs)
    header = {"config": cfg.to_dict(), "metrics": metrics, "target": args.target}
    lines = [_dumps(header)] + [_dumps(r) for r in rows]
    if rows:
        lines.append(_dumps(aggregate(rows)))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# score

def cmd_score(args, cfg: RunConfig) -> int:
    if bool(args.embeddings) == bool(args.scores):
        raise UsageError("give exactly one of --embeddings or --scores")
    _require_files([args.trials, args.embeddings or args.scores])
    trials = scoring.read_trials(args.trials)
    if args.embeddings:
        table = features.load_embeddings(args.embeddings)
        try:
            rows = scoring.trial_scores(trials, table)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc
        scores = scoring.TrialScoreSet(
            [r[2] for r in rows if r[3] == "target"], [r[2] for r in rows if r[3] == "nontarget"]
        )
        if args.scores_out:
            scoring.write_scores(rows, args.scores_out)
    else:
        try:
            scores = scoring.scores_for_trials(trials, scoring.read_scores(args.scores))
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc
    eer, eer_thr = scoring.eer(scores)
    dcf, dcf_thr = scoring.min_dcf(scores, cfg.dcf)
    if args.det_out:
        scoring.write_det(scoring.det_points(scores), args.det_out)
    result = {
        "eer": eer,
        "eer_threshold": eer_thr,
        "min_dcf": dcf,
        "min_dcf_threshold": dcf_thr,
        "n_target": int(scores.target_scores.size),
        "n_nontarget": int(scores.nontarget_scores.size),
        "dcf": cfg.dcf.to_dict(),
    }
    sys.stdout.write(_dumps(result) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wpebench", description="WPE dereverberation workbench")
    p.add_argument("--config", help="TOML config file (flags override it)")
    p.add_argument("--jobs", type=int, default=None, help="parallel utterances (env WPEBENCH_JOBS)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render observations from a JSON-lines manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--boundary-ms", type=float)
    s.add_argument("--bit-depth", choices=("float32", "pcm16"))
    s.add_argument("--seed", type=int, help="seed for manifest lines without one")

    d = sub.add_parser("dereverb", help="dereverberate WAV files (channel 0)")
    d.add_argument("inputs", nargs="+")
    d.add_argument("--mode", required=True, choices=MODES)
    d.add_argument("--out-dir", required=True)
    d.add_argument("--delay", type=int)
    d.add_argument("--taps", type=int)
    d.add_argument("--iterations", type=int)
    d.add_argument("--psd-mode", choices=wpe.PSD_MODES)
    d.add_argument("--diag-load", type=float)
    d.add_argument("--psd-floor", type=float)
    d.add_argument("--psd", nargs="+", help="LPS dumps (SPG1), one per input")
    d.add_argument("--virtual-kind", choices=("file", "delayed_copy", "filtered_copy"))
    d.add_argument("--virtual", nargs="+", help="virtual-channel WAV or SPG1 files, one per input")
    d.add_argument("--virtual-delay", type=int, default=0, help="frames, for delayed_copy")
    d.add_argument("--virtual-taps", help="comma-separated taps, for filtered_copy")
    d.add_argument("--bit-depth", choices=("float32", "pcm16"))

    e = sub.add_parser("evaluate", help="score processed files against simulation references")
    e.add_argument("--references", nargs="+", required=True, help="per-utterance JSON records from simulate")
    e.add_argument("--processed-dir", required=True)
    e.add_argument("--metrics", default=",".join(METRICS))
    e.add_argument("--target", choices=TARGETS, default="early_noisy")
    e.add_argument("--out", help="write the JSON-lines report here instead of stdout")

    c = sub.add_parser("score", help="EER / minDCF / DET from trials and embeddings or scores")
    c.add_argument("--trials", required=True)
    c.add_argument("--embeddings")
    c.add_argument("--scores")
    c.add_argument("--p-tar", type=float)
    c.add_argument("--c-miss", type=float)
    c.add_argument("--c-fa", type=float)
    c.add_argument("--det-out")
    c.add_argument("--scores-out")
    return p


def _overrides(args) -> dict:
    g = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "wpe": {
            "delay": g("delay"),
            "taps": g("taps"),
            "iterations": g("iterations"),
            "psd_mode": g("psd_mode"),
            "diag_load": g("diag_load"),
            "psd_floor": g("psd_floor"),
        },
        "dcf": {"p_tar": g("p_tar"), "c_miss": g("c_miss"), "c_fa": g("c_fa")},
        "run": {
            "boundary_ms": g("boundary_ms"),
            "bit_depth": g("bit_depth"),
            "seed": g("seed"),
            "jobs": g("jobs"),
        },
    }


def resolve_config(args) -> RunConfig:
    ov = _overrides(args)
    if ov["run"]["jobs"] is None and not explicitly_set(args.config, None, "run", "jobs"):
        ov["run"]["jobs"] = default_jobs()
    if args.command == "dereverb":
        if args.psd and not explicitly_set(args.config, ov, "wpe", "psd_mode"):
            ov["wpe"]["psd_mode"] = "external"
        for key, table in (("taps", MODE_TAPS), ("psd_mode", MODE_PSD)):
            if not explicitly_set(args.config, ov, "wpe", key):
                ov["wpe"][key] = table[args.mode]
    return load_run_config(args.config, ov)


COMMANDS = {"simulate": cmd_simulate, "dereverb": cmd_dereverb, "evaluate": cmd_evaluate, "score": cmd_score}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except NumericalError as exc:
        print(f"wpebench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (WorkbenchError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"wpebench: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
