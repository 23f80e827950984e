import argparse
import logging
import sys
import traceback

from proxnest.model_core import ConfigError

from . import compare, prior_sample, prox_check, run, serve_denoiser

COMMANDS = {
    "run": run,
    "compare": compare,
    "prior-sample": prior_sample,
    "prox-check": prox_check,
    "serve-denoiser": serve_denoiser,
}

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILURE = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="proxnest", description="Proximal nested sampling para problemas inversos de imagem.")
    p.add_argument("--debug", action="store_true", help="log DEBUG e stacktrace completo em caso de erro")
    sub = p.add_subparsers(dest="command", required=True)
    for name, module in COMMANDS.items():
        sp = sub.add_parser(name, help=module.HELP)
        sp.add_argument("--debug", action="store_true", default=argparse.SUPPRESS)
        module.add_arguments(sp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    debug_mode = bool(args.debug)
    # serve-denoiser usa stdout para frames: log só em stderr
    logging.basicConfig(
        level=logging.DEBUG if debug_mode else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return int(COMMANDS[args.command].handle(args) or EXIT_OK)

    except ConfigError as e:
        print(f"ERROR {args.command}: {e}", file=sys.stderr)
        if debug_mode:
            print(traceback.format_exc(), file=sys.stderr)
        return EXIT_CONFIG

    except Exception as e:
        tb = traceback.format_exc()
        print(f"ERROR {args.command}: {e}", file=sys.stderr)
        if debug_mode:
            print(tb, file=sys.stderr)
        else:
            print("Use --debug para ver o stacktrace.", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
