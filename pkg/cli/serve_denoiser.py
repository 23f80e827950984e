import logging
import sys

from proxnest.denoiser import GaussianSmoothingDenoiser, serve_denoiser

HELP = "serve um denoiser em processo pelo protocolo de frames em stdin/stdout"

logger = logging.getLogger(__name__)


def add_arguments(p):
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--width", type=float, default=1.0, help="largura do kernel Gaussiano (pixels)")
    p.add_argument("--epsilon", type=float, default=8.34)


def handle(args) -> int:
    d = GaussianSmoothingDenoiser(width=args.width, epsilon=args.epsilon)
    served = serve_denoiser(d, (args.rows, args.cols), sys.stdin.buffer, sys.stdout.buffer)
    logger.info("serve-denoiser: %d frames atendidos", served)
    return 0
