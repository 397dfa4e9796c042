import argparse
import json
import os
import sys
from typing import List, Optional

from moregan import debug
from moregan.exceptions import DatasetIOError, MoreGANException, ParamError, exit_code


def _common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', default=None, help='flat key = value config file')
    parser.add_argument('--seed', type=int, default=None, help='overrides the config seed')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='config override, wins over the config file; repeatable')
    parser.add_argument('--debug', action='store_true', help='log per-sample and per-step details')


def _config(args):
    from moregan.trainer.config import load_config
    return load_config(args.config, args.overrides, args.seed)


def _print_json(data):
    print(json.dumps(data, ensure_ascii=False, indent=2))


def cmd_synth(args) -> int:
    from moregan.rainsim.dataset import synthesize_dataset
    from moregan.rainsim.recipe import RecipeSpace

    config = _config(args)
    space = RecipeSpace()
    if args.recipe_space:
        try:
            with open(args.recipe_space, 'r', encoding='utf-8') as f:
                space = RecipeSpace.from_dict(json.load(f))
        except (OSError, ValueError) as e:
            raise DatasetIOError(args.recipe_space, str(e))
    manifest = synthesize_dataset(args.clean, args.depth, space, args.n, args.out, config.seed,
                                  workers=args.workers)
    _print_json({'out': args.out, 'samples': len(manifest)})
    return 0


def cmd_train(args) -> int:
    from moregan.trainer.data import load_paired, load_unpaired
    from moregan.trainer.semi import train

    config = _config(args)
    if args.out:
        config = config.replace(out_dir=args.out)
    paired = load_paired(args.paired)
    unpaired = load_unpaired(args.unpaired) if args.unpaired else None
    path = train(config, paired, unpaired)
    _print_json({'checkpoint': path})
    return 0


def cmd_derain(args) -> int:
    from moregan.toolkit import imageio
    from moregan.toolkit.evaluation import derain_image
    from moregan.trainer.checkpoint import load_generator

    config = _config(args)
    generator, _ = load_generator(args.checkpoint, config.device)
    if os.path.isdir(args.input):
        pairs = [(p, os.path.join(args.output, os.path.splitext(os.path.basename(p))[0] + '.png'))
                 for p in imageio.list_images(args.input)]
        if not pairs:
            raise DatasetIOError(args.input, 'no images found')
        os.makedirs(args.output, exist_ok=True)
    else:
        pairs = [(args.input, args.output)]
    for src, dst in pairs:
        derained, depth = derain_image(generator, imageio.read_rgb(src), config.device)
        imageio.write_rgb(dst, derained)
        if args.depth_out and depth is not None:
            os.makedirs(args.depth_out, exist_ok=True)
            imageio.write_depth(os.path.join(args.depth_out, os.path.basename(dst)), depth)
    _print_json({'derained': len(pairs)})
    return 0


def cmd_eval(args) -> int:
    from moregan.toolkit.evaluation import evaluate

    config = _config(args)
    luminance = True if args.luminance else None
    report = evaluate(args.checkpoint, args.data, out_dir=args.out, grids=args.grids,
                      luminance=luminance, device=config.device)
    _print_json(vars(report)['mean'])
    return 0


def cmd_profile(args) -> int:
    from moregan.model.pdnl import PyramidPoolSpec
    from moregan.toolkit.profiler import parse_dims, profile_pdnl

    config = _config(args)
    dims = parse_dims(args.dims)
    if not dims:
        raise ParamError('no dims to profile')
    report = profile_pdnl(dims, PyramidPoolSpec(config.bin_sizes), repeats=args.repeats,
                          measure=not args.no_measure, out_dir=args.out)
    print(report.to_string(index=False))
    return 0


def cmd_ablate(args) -> int:
    from moregan.toolkit.evaluation import ablate, ablation_matrix

    config = _config(args)
    if args.matrix:
        try:
            with open(args.matrix, 'r', encoding='utf-8') as f:
                matrix = json.load(f)
        except (OSError, ValueError) as e:
            raise DatasetIOError(args.matrix, str(e))
    else:
        matrix = ablation_matrix(args.grid)
    table = ablate(matrix, args.paired, config, unpaired_root=args.unpaired, out_dir=args.out)
    print(table.to_string(index=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='moregan', description='mixture-of-rain removal toolkit')
    sub = parser.add_subparsers(dest='verb', required=True)

    p = sub.add_parser('synth', help='synthesize a paired rainy dataset')
    _common(p)
    p.add_argument('--clean', required=True, help='directory of clean images')
    p.add_argument('--depth', default=None, help='directory of 16-bit depth PNGs, constant 0.5 when omitted')
    p.add_argument('--out', required=True, help='dataset root')
    p.add_argument('--n', type=int, required=True, help='number of samples')
    p.add_argument('--workers', type=int, default=1)
    p.add_argument('--recipe-space', default=None, help='JSON file of (low, high) recipe ranges')
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('train', help='semi-supervised training')
    _common(p)
    p.add_argument('--paired', required=True, help='paired dataset root')
    p.add_argument('--unpaired', default=None, help='directory of real rainy images')
    p.add_argument('--out', default=None, help='overrides out_dir')
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('derain', help='derain an image or a directory of images')
    _common(p)
    p.add_argument('input')
    p.add_argument('output')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--depth-out', default=None, help='also write predicted depth maps here')
    p.set_defaults(handler=cmd_derain)

    p = sub.add_parser('eval', help='PSNR/SSIM of a checkpoint on a paired dataset')
    _common(p)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--data', required=True, help='paired dataset root')
    p.add_argument('--out', default=None, help='report directory')
    p.add_argument('--grids', action='store_true', help='write rainy | derained | clean | depth PNGs')
    p.add_argument('--luminance', action='store_true', help='SSIM on luma only')
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('profile', help='dense non-local versus PDNL cost')
    _common(p)
    p.add_argument('--dims', default='32x64x64,64x128x64', help='comma separated HxWxC')
    p.add_argument('--repeats', type=int, default=5)
    p.add_argument('--no-measure', action='store_true', help='analytic counts only')
    p.add_argument('--out', default=None, help='directory for the CSV and plot')
    p.set_defaults(handler=cmd_profile)

    p = sub.add_parser('ablate', help='component or loss ablation at desk scale')
    _common(p)
    p.add_argument('--paired', required=True)
    p.add_argument('--unpaired', default=None)
    p.add_argument('--grid', default='components', choices=['components', 'losses'])
    p.add_argument('--matrix', default=None, help='JSON list of override dicts, replaces --grid')
    p.add_argument('--out', default=None)
    p.set_defaults(handler=cmd_ablate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.debug:
        debug.DebugEnable = True
    debug.Info('moregan %s', args.verb)
    try:
        return args.handler(args)
    except MoreGANException as e:
        debug.Warning(str(e))
        return exit_code(e)


if __name__ == '__main__':
    sys.exit(main())
