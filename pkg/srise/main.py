# srise/main.py
import argparse
import asyncio
import logging
import logging.handlers
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .api.commands import (cmd_eval, cmd_explain, cmd_gen_fixtures,
                           cmd_sanity, cmd_triplet)
from .core.config import build_run_config, load_settings
from .core.errors import ConfigError, SRISEError

logger = logging.getLogger("srise")

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

LEVEL_COLORS = {
    logging.DEBUG: '\033[0;34m',
    logging.INFO: '\033[0;32m',
    logging.WARNING: '\033[1;33m',
    logging.ERROR: '\033[0;31m',
    logging.CRITICAL: '\033[0;31m',
}
RESET = '\033[0m'


class ColorFormatter(logging.Formatter):
    def format(self, record):
        message = super().format(record)
        color = LEVEL_COLORS.get(record.levelno)
        return f"{color}{message}{RESET}" if color else message


def configure_logging(level: str = "INFO", log_file: Optional[Path] = None, no_color: bool = False):
    """Log to stderr (colored on a TTY unless disabled) and optionally to a rotating file."""
    handler = logging.StreamHandler(sys.stderr)
    colored = not no_color and hasattr(sys.stderr, "isatty") and sys.stderr.isatty()
    handler.setFormatter(ColorFormatter(LOG_FORMAT) if colored else logging.Formatter(LOG_FORMAT))
    handlers = [handler]

    if log_file:
        try:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.handlers.RotatingFileHandler(
                log_file, maxBytes=100 * 1024 * 1024, backupCount=5, encoding="utf-8"
            )
        except OSError as e:
            raise ConfigError(f"Cannot open log file {log_file}: {e}") from e
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)

    logging.basicConfig(level=level.upper(), handlers=handlers, force=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='YAML run configuration (flat key: value mapping).')
    common.add_argument('--seed', type=int, help='Seed of every random stream.')
    common.add_argument('--masks', type=int, help='Number of masks N.')
    common.add_argument('--kernels', type=int, help='Gaussian kernels per mask K.')
    common.add_argument('--kernel-size', type=int, dest='kernel_size', help='Odd kernel size in pixels.')
    common.add_argument('--sigma', type=float, help='Kernel standard deviation (default size/4).')
    common.add_argument('--threshold', type=float, help='Verification threshold for the metrics.')
    common.add_argument('--step', type=int, help='Pixels changed per metric round.')
    common.add_argument('--workers', type=int, help='Worker threads (0 = one per physical core).')
    common.add_argument('--out', type=Path, help='Output directory.')
    common.add_argument('--size', type=int, help='Square image size in pixels (height and width).')
    model = common.add_mutually_exclusive_group()
    model.add_argument('--embedder', choices=['patch_mean', 'random_projection', 'randomized'],
                       help='Built-in embedder.')
    model.add_argument('--model', type=Path, help='ONNX model file (selects the external embedder).')

    parser = argparse.ArgumentParser(prog='srise', description='S-RISE saliency maps for similarity models.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    explain = sub.add_parser('explain', parents=[common], help='Explain an image pair.')
    explain.add_argument('images', nargs=2, type=Path, metavar='IMAGE')

    triplet = sub.add_parser('triplet', parents=[common], help='Explain a probe/mate/nonmate triplet.')
    triplet.add_argument('images', nargs=3, type=Path, metavar='IMAGE')

    evaluate = sub.add_parser('eval', parents=[common], help='Deletion/insertion over a triplet dataset.')
    evaluate.add_argument('dataset', type=Path)
    evaluate.add_argument('--iterations', type=int, nargs='+', help='Mask counts N to evaluate.')

    sanity = sub.add_parser('sanity', parents=[common], help='Model-parameter randomization check.')
    sanity.add_argument('images', nargs=2, type=Path, metavar='IMAGE')

    fixtures = sub.add_parser('gen-fixtures', parents=[common], help='Write synthetic triplets.')
    fixtures.add_argument('--count', type=int, default=20)
    fixtures.add_argument('--channels', type=int, choices=[1, 3], default=1)
    fixtures.add_argument('--occlusion', choices=['none', 'mask', 'sunglasses'], default='none')
    fixtures.add_argument('--pairs', action='store_true',
                          help='Write interleaved image pairs for the sanity check instead of triplets.')
    return parser


def overrides_from(args: argparse.Namespace) -> dict:
    overrides = {
        'seed': args.seed,
        'masks': args.masks,
        'kernels': args.kernels,
        'kernel_size': args.kernel_size,
        'sigma': args.sigma,
        'threshold': args.threshold,
        'step': args.step,
        'workers': args.workers,
        'out': args.out,
        'embedder': args.embedder,
        'iterations': getattr(args, 'iterations', None),
    }
    if args.model is not None:
        overrides.update(embedder='external', model=args.model)
    if args.size is not None:
        overrides.update(image_height=args.size, image_width=args.size)
    return overrides


async def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, load configuration and dispatch one command."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        settings = load_settings()
    except ConfigError as e:
        configure_logging()
        logger.error(str(e))
        return e.exit_code
    configure_logging(settings.log_level, no_color=settings.no_color)

    try:
        cfg = build_run_config(args.config or settings.config, overrides_from(args))
        if cfg.log_level or cfg.log_file:
            configure_logging(cfg.log_level or settings.log_level, cfg.log_file, settings.no_color)

        logger.info(f"srise {args.command} (seed {cfg.seed})")
        if args.command == 'explain':
            return await cmd_explain(args.images, cfg)
        if args.command == 'triplet':
            return await cmd_triplet(args.images, cfg)
        if args.command == 'eval':
            return await cmd_eval(args.dataset, cfg)
        if args.command == 'sanity':
            return await cmd_sanity(args.images, cfg)
        size = args.size or cfg.image_height
        return await cmd_gen_fixtures(cfg.out, cfg, args.count, size, args.channels, args.occlusion,
                                      pairs=args.pairs)

    except SRISEError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Received interrupt signal")
        return 130
    except Exception as e:
        logger.exception(f"Fatal error: {e}")
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    return asyncio.run(run(argv))


if __name__ == "__main__":
    sys.exit(main())
