"""Command-line front end.

Subcommands: ``synth``, ``spectrogram``, ``features``, ``fit``, ``assign``,
``compare``, ``search``. Each writes its outputs plus ``manifest.json`` into
the output directory. Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path


from .cluster import assign_all, load_gmm, purity, save_gmm, save_loss_history
from .config import PipelineConfig, load_config, write_effective_config
from .errors import ConfigError, DataError, NumericError, SeisWarpError
from .features import load_cnn, save_cnn
from .pipeline import FeatureScaler, featurize, make_spectrograms, run_pipeline
from .search import refit_best, save_trial_log, search_constants
from .signal_io import (
    generate_synthetic,
    load_waveform,
    make_two_class_dataset,
    save_waveform,
    segment,
)
from .spectral import FrequencyScale, save_spectrogram_csv, write_pgm

log = logging.getLogger("seiswarp")

#: full-scale clustering losses (ordinary vs warped spectrogram) reported for
#: ResNet-18/50/101/152; printed as context, never used as expected values
REFERENCE_LOSSES = (
    ("Resnet 18", 6.27, 5.04),
    ("Resnet 50", 5.62, 4.50),
    ("Resnet 101", 4.79, 3.95),
    ("Resnet 152", 3.56, 2.90),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class Outputs:
    """Collects written files for the manifest."""

    def __init__(self, root: Path, command: str):
        self.root = root
        self.command = command
        self.files = []
        self.auxiliary = []
        root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str, primary: bool = True) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        (self.files if primary else self.auxiliary).append(name)
        return p

    def write_manifest(self) -> Path:
        p = self.root / "manifest.json"
        doc = {"command": self.command, "outputs": self.files, "auxiliary": self.auxiliary}
        p.write_text(json.dumps(doc, indent=2) + "\n")
        return p


# ---------------------------------------------------------------------------
# dataset assembly


def _synth_waveforms(cfg: PipelineConfig):
    for i in range(cfg.synth.channels):
        spec = replace(cfg.synth.spec, seed=cfg.synth.spec.seed + i,
                       channel_id=f"{cfg.synth.spec.channel_id}{i:02d}")
        yield generate_synthetic(spec)


def load_dataset(cfg: PipelineConfig) -> list:
    """Segments described by the ``[input]`` section."""
    inp = cfg.input
    if inp.source == "two_class":
        return make_two_class_dataset(cfg.two_class)
    window = inp.window_s or 40.0
    stride = inp.stride_s or window
    segments = []
    if inp.source == "synth":
        for w, labels in _synth_waveforms(cfg):
            segments.extend(segment(w, window, stride, labels))
    else:
        if not inp.paths:
            raise ConfigError("[input] source = files needs paths")
        for p in inp.paths:
            segments.extend(segment(load_waveform(p), window, stride))
    if not segments:
        raise DataError("no complete window in the input data")
    return segments


def _labels(segments):
    labels = [s.label for s in segments]
    return labels if all(lab is not None for lab in labels) else None


def _scale_tag(scale: FrequencyScale) -> str:
    if scale.is_linear:
        return "linear"
    if scale == FrequencyScale.mel():
        return "mel"
    return f"warped_{scale.c1:g}_{scale.c2:g}"


def _write_rows(path: Path, header: str, rows) -> Path:
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


def _feature_rows(segments, features):
    for i, (seg, row) in enumerate(zip(segments, features)):
        yield ",".join([str(i), seg.source_channel, repr(float(seg.offset_s)), seg.label or ""]
                       + [repr(float(v)) for v in row])


def _assignment_rows(segments, ids, post):
    for i, seg in enumerate(segments):
        yield f"{i},{seg.source_channel},{float(seg.offset_s)!r},{seg.label or ''},{int(ids[i])},{float(post[i])!r}"


def _load_cnn_override(cfg: PipelineConfig):
    return load_cnn(cfg.cnn_weights) if cfg.cnn_weights else None


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: PipelineConfig, out: Outputs) -> None:
    for w, labels in _synth_waveforms(cfg):
        save_waveform(w, out.path(f"{w.channel_id}.csv"))
        _write_rows(out.path(f"{w.channel_id}.labels.csv", primary=False), "sample,label",
                    (f"{i},{lab}" for i, lab in enumerate(labels)))


def cmd_spectrogram(cfg: PipelineConfig, out: Outputs) -> None:
    segments = load_dataset(cfg)
    scales = cfg.spectrogram_scales or (FrequencyScale.mel(), cfg.scale)
    seen = []
    for scale in scales:
        if scale not in seen:
            seen.append(scale)
    for scale in seen:
        tag = _scale_tag(scale)
        _, specs = make_spectrograms(segments, scale, cfg.settings)
        for i, spec in enumerate(specs):
            save_spectrogram_csv(spec, out.path(f"{tag}/seg{i:04d}.csv"))
            write_pgm(spec, out.path(f"{tag}/seg{i:04d}.pgm"), cfg.settings.floor_db)


def _featurize(cfg: PipelineConfig, segments):
    return featurize(segments, cfg.scale, cfg.settings, _load_cnn_override(cfg))


def cmd_features(cfg: PipelineConfig, out: Outputs) -> None:
    segments = load_dataset(cfg)
    _, specs, cnn, scaler, feats = _featurize(cfg, segments)
    header = "segment_id,channel,offset_s,label," + ",".join(f"f{j}" for j in range(feats.shape[1]))
    _write_rows(out.path("features.csv"), header, _feature_rows(segments, feats[: len(segments)]))
    save_cnn(cnn, out.path("cnn.txt"))
    scaler.save(out.path("scaler.csv"))


def cmd_fit(cfg: PipelineConfig, out: Outputs) -> None:
    segments = load_dataset(cfg)
    try:
        run = run_pipeline(segments, cfg.scale, cfg.settings, _load_cnn_override(cfg))
    except NumericError as exc:
        raise NumericError(f"fit stage: {exc}") from exc
    save_gmm(run.model, out.path("gmm.txt"))
    save_loss_history(run.loss_history, out.path("loss_history.csv"))
    save_cnn(run.cnn, out.path("cnn.txt"))
    run.scaler.save(out.path("scaler.csv"))
    header = "row,channel,offset_s,label," + ",".join(f"f{j}" for j in range(run.features.shape[1]))
    copies = cfg.settings.augment.copies_per_item
    sources = segments + [segments[c // copies] for c in range(len(run.features) - len(segments))]
    _write_rows(out.path("features.csv"), header, _feature_rows(sources, run.features))
    ids, post = assign_all(run.model, run.features[: len(segments)])
    _write_rows(out.path("assignments.csv"), "segment_id,channel,offset_s,label,cluster_id,max_posterior",
                _assignment_rows(segments, ids, post))
    log.info("fit: K=%d final NLL=%.6g after %d epochs", run.model.K, run.final_loss,
             len(run.loss_history) - 1)


def cmd_assign(cfg: PipelineConfig, out: Outputs) -> None:
    a = cfg.assign
    if not a.model:
        raise ConfigError("assign needs [assign] model = <gmm file> (and usually scaler, cnn)")
    model = load_gmm(a.model)
    cnn = load_cnn(a.cnn) if a.cnn else _load_cnn_override(cfg)
    scaler = FeatureScaler.load(a.scaler) if a.scaler else None
    segments = load_dataset(cfg)
    settings = replace(cfg.settings, augment=replace(cfg.settings.augment, copies_per_item=0))
    _, _, _, _, feats = featurize(segments, cfg.scale, settings, cnn, scaler)
    ids, post = assign_all(model, feats)
    _write_rows(out.path("assignments.csv"), "segment_id,channel,offset_s,label,cluster_id,max_posterior",
                _assignment_rows(segments, ids, post))


def depth_blocks(depth: int, stem_filters: int) -> tuple:
    """Residual block layout for a depth sweep: channels double at every second block."""
    blocks = []
    for j in range(depth):
        filters = stem_filters * 2 ** ((j + 1) // 2)
        blocks.append((filters, 2 if j % 2 == 1 else 1))
    return tuple(blocks)


def compare_rows(segments, cfg: PipelineConfig) -> list:
    """Linear-vs-warped losses per depth, identical apart from the scale."""
    labels = _labels(segments)
    rows = []
    for depth in cfg.compare.depths:
        cnn = replace(cfg.settings.cnn, blocks=depth_blocks(depth, cfg.settings.cnn.stem_filters))
        settings = replace(cfg.settings, cnn=cnn)
        row = {"depth": f"resblocks-{depth}", "settings": settings}
        try:
            for col, scale in (("linear", cfg.compare.linear_scale), ("warped", cfg.scale)):
                run = run_pipeline(segments, scale, settings)
                row[f"loss_{col}"] = run.final_loss
                row[f"K_{col}"] = run.model.K
                if labels is not None:
                    ids, _ = assign_all(run.model, run.features[: len(segments)])
                    row[f"purity_{col}"] = purity(labels, ids)
        except SeisWarpError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def cmd_compare(cfg: PipelineConfig, out: Outputs) -> None:
    segments = load_dataset(cfg)
    rows = compare_rows(segments, cfg)
    cols = ["depth", "loss_linear", "loss_warped", "K_linear", "K_warped", "purity_linear", "purity_warped"]
    lines = [",".join(cols + ["error"])]
    for r in rows:
        lines.append(",".join([_fmt(r.get(c)) for c in cols]
                              + [r.get("error", "").replace(",", ";")]))
    _write_rows(out.path("compare.csv"), lines[0], lines[1:])

    table = [f"linear column: {cfg.compare.linear_scale}", f"warped column: {cfg.scale}", "",
             f"{'CNN':<14}{'loss linear':>16}{'loss warped':>16}"]
    for r in rows:
        if "error" in r:
            table.append(f"{r['depth']:<14}  failed: {r['error']}")
        else:
            table.append(f"{r['depth']:<14}{r['loss_linear']:>16.4f}{r['loss_warped']:>16.4f}")
    table.append("")
    table.append("full-scale reference (clustering loss, ordinary vs warped spectrogram):")
    for name, lin, warp in REFERENCE_LOSSES:
        table.append(f"{name:<14}{lin:>16.2f}{warp:>16.2f}")
    out.path("compare.txt").write_text("\n".join(table) + "\n")

    for col, scale in (("linear", cfg.compare.linear_scale), ("warped", cfg.scale)):
        text = [f"scale = {scale}"]
        text += [f"{r['depth']} = {r['settings']!r}" for r in rows]
        out.path(f"effective_{col}.txt").write_text("\n".join(text) + "\n")
    print("\n".join(table))


def cmd_search(cfg: PipelineConfig, out: Outputs) -> None:
    segments = load_dataset(cfg)
    result = search_constants(segments, cfg.search)
    save_trial_log(result.trial_log, out.path("trials.csv"))
    lines = [f"c1 = {result.best_c1!r}", f"c2 = {result.best_c2!r}",
             f"search_loss = {result.best_loss!r}",
             f"scale = warped:{result.best_c1!r},{result.best_c2!r}"]
    if cfg.refit:
        run = refit_best(segments, result, cfg.search.settings)
        lines.append(f"refit_loss = {run.final_loss!r}")
        lines.append(f"refit_epochs = {len(run.loss_history) - 1}")
        lines.append(f"refit_K = {run.model.K}")
    out.path("best_constants.txt").write_text("\n".join(lines) + "\n")


COMMANDS = {
    "synth": (cmd_synth, "write synthetic waveforms and per-sample labels"),
    "spectrogram": (cmd_spectrogram, "write spectrogram CSVs and PGM images per scale"),
    "features": (cmd_features, "write CNN feature vectors"),
    "fit": (cmd_fit, "fit the mixture; write model, loss history and assignments"),
    "assign": (cmd_assign, "assign segments with a saved mixture"),
    "compare": (cmd_compare, "linear vs warped clustering loss over CNN depths"),
    "search": (cmd_search, "random search over warp constants"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help="output directory (overrides [output] dir)")
    common.add_argument("--seed", type=int, help="replace every seed in the configuration")
    common.add_argument("--scale", help="linear | mel | warped:<c1>,<c2>")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="seiswarp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, sections = load_config(args.config, args.set, args.seed, args.scale, args.out)
        out = Outputs(Path(cfg.out_dir), args.command)
        write_effective_config(sections, out.path("effective_config.ini", primary=False))
        COMMANDS[args.command][0](cfg, out)
        out.write_manifest()
    except SeisWarpError as exc:
        print(f"seiswarp {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"seiswarp {args.command}: I/O error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
