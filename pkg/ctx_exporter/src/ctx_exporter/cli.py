"""Command-line entry point.

Exit codes: 0 clean export (truncations allowed), 1 export finished but
documents were skipped, 2 bad arguments, 3 corpus or model failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import CorpusError, ExporterError, ExportError, ModelLoadError
from .exporter import ExportJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctx-exporter",
        description="Write first-position transformer embeddings for a corpus to a CTXE file",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="encode a corpus and write the embedding file")
    p.add_argument("--corpus", required=True, help="JSONL corpus with entity spans")
    p.add_argument("--model", required=True, help="pretrained encoder name or local path")
    p.add_argument("--out", required=True, help="output CTXE path")
    p.add_argument("--batch", type=int, default=32, help="inference batch size")
    p.add_argument("--max-len", type=int, default=128, help="token length budget per document")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
    except Exception:
        pass

    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus_path=args.corpus,
        model_name=args.model,
        output_path=args.out,
        batch_size=args.batch,
        max_sequence_length=args.max_len,
    )
    try:
        report = export_embeddings(job)
    except (CorpusError, ModelLoadError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(
        f"wrote {report.written} vectors (dim {report.dim}) to {args.out}; "
        f"truncated {len(report.truncated_ids)}, skipped {len(report.skipped_ids)}"
    )
    if not report.clean:
        print(
            f"error: {len(report.skipped_ids)} documents skipped "
            f"(entity spans crossed the --max-len budget): "
            + ", ".join(report.skipped_ids[:10])
            + ("..." if len(report.skipped_ids) > 10 else ""),
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
