"""actextract CLI: dump layer activations, list resolvable layers."""

from __future__ import annotations

import argparse
import sys

from .extract import (ExtractionSpec, LayerNotFoundError, extract,
                      list_layers, load_model, load_samples)


def cmd_extract(args) -> int:
    extract(ExtractionSpec(model_path=args.model, layer_name=args.layer,
                           data_path=args.data, role=args.role,
                           batch_size=args.batch_size, out_path=args.out))
    return 0


def cmd_layers(args) -> int:
    model = load_model(args.model)
    probe = load_samples(args.data) if args.data else None
    print(list_layers(model, probe), end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actextract",
        description="Capture a named layer's activations from a pre-trained "
                    "torch model into the actsketch binary format.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run samples and dump one layer")
    p.add_argument("--model", required=True,
                   help="torch.save'd module or TorchScript archive")
    p.add_argument("--layer", required=True, help="named module to capture")
    p.add_argument("--data", required=True, help=".npy or numeric CSV samples")
    p.add_argument("--role", choices=["background", "clean", "anomalous"],
                   default="background")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("layers", help="list resolvable layer names")
    p.add_argument("--model", required=True)
    p.add_argument("--data", default=None,
                   help="optional probe samples, enables output shapes")
    p.set_defaults(func=cmd_layers)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LayerNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ValueError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
