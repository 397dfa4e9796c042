from typing import Dict, Optional, Tuple

import numpy as np

from moregan.exceptions import ParamError


class StreakParams:
    """Generation parameters of a streak pattern, enough to rasterize it again."""

    def __init__(self, count: int, angle_deg: float, length_px: int, width_px: int,
                 intensity: float, seed: int):
        self.count = int(count)
        self.angle_deg = float(angle_deg)
        self.length_px = int(length_px)
        self.width_px = int(width_px)
        self.intensity = float(intensity)
        self.seed = int(seed)

    @property
    def __dict__(self):
        return {
            'count': self.count,
            'angle_deg': self.angle_deg,
            'length_px': self.length_px,
            'width_px': self.width_px,
            'intensity': self.intensity,
            'seed': self.seed,
        }

    def rasterize(self, h: int, w: int) -> np.ndarray:
        from moregan.rainsim.physics import make_streak_pattern
        return make_streak_pattern(h, w, self.count, self.angle_deg, self.length_px,
                                   self.width_px, self.intensity, self.seed)


class RainRecipe:
    """
    Generative parameters of one degradation instance.

    Args:
        streak_pattern: [H,W,1] array in [0,1]
        alpha: streak attenuation with depth, >= 0 (0 disables attenuation)
        beta: haze thickness, >= 0
        atm_light: global atmospheric light in [0,1]
        d1: near-plane clamp in (0,1]
        seed: seed the recipe was drawn with
        streak: the parameters the pattern was rasterized from, if known
    """

    def __init__(self, streak_pattern: np.ndarray, alpha: float, beta: float, atm_light: float,
                 d1: float, seed: int = 0, streak: Optional[StreakParams] = None):
        pattern = np.asarray(streak_pattern, dtype=np.float64)
        if pattern.ndim == 2:
            pattern = pattern[..., None]
        if pattern.ndim != 3 or pattern.shape[2] != 1:
            raise ParamError('streak_pattern must be [H,W,1], got {}'.format(pattern.shape))
        if pattern.min(initial=0.0) < 0.0 or pattern.max(initial=0.0) > 1.0:
            raise ParamError('streak_pattern must lie in [0,1]')
        if alpha < 0:
            raise ParamError('alpha must be >= 0, got {}'.format(alpha))
        if beta < 0:
            raise ParamError('beta must be >= 0, got {}'.format(beta))
        if not 0.0 <= atm_light <= 1.0:
            raise ParamError('atm_light must be in [0,1], got {}'.format(atm_light))
        if not 0.0 < d1 <= 1.0:
            raise ParamError('d1 must be in (0,1], got {}'.format(d1))
        self.streak_pattern = pattern
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.atm_light = float(atm_light)
        self.d1 = float(d1)
        self.seed = int(seed)
        self.streak = streak

    @property
    def __dict__(self):
        res = {
            'alpha': self.alpha,
            'beta': self.beta,
            'atm_light': self.atm_light,
            'd1': self.d1,
            'seed': self.seed,
        }
        if self.streak is not None:
            res['streak'] = vars(self.streak)
        return res


def _uniform(rng: np.random.Generator, bounds: Tuple[float, float]) -> float:
    lo, hi = bounds
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


class RecipeSpace:
    """
    Sampling distribution over RainRecipe. Every parameter is drawn uniformly from its
    (low, high) range; the defaults are documented settings, not values from the literature.
    """

    def __init__(self,
                 count: Tuple[int, int] = (60, 200),
                 angle_deg: Tuple[float, float] = (70.0, 110.0),
                 length_px: Tuple[int, int] = (6, 16),
                 width_px: Tuple[int, int] = (1, 2),
                 intensity: Tuple[float, float] = (0.5, 1.0),
                 alpha: Tuple[float, float] = (1.0, 3.0),
                 beta: Tuple[float, float] = (0.5, 2.0),
                 atm_light: Tuple[float, float] = (0.7, 0.95),
                 d1: Tuple[float, float] = (0.05, 0.2)):
        self.count = count
        self.angle_deg = angle_deg
        self.length_px = length_px
        self.width_px = width_px
        self.intensity = intensity
        self.alpha = alpha
        self.beta = beta
        self.atm_light = atm_light
        self.d1 = d1

    @property
    def __dict__(self):
        return {
            'count': list(self.count),
            'angle_deg': list(self.angle_deg),
            'length_px': list(self.length_px),
            'width_px': list(self.width_px),
            'intensity': list(self.intensity),
            'alpha': list(self.alpha),
            'beta': list(self.beta),
            'atm_light': list(self.atm_light),
            'd1': list(self.d1),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "RecipeSpace":
        known = vars(cls())
        kwargs = {}
        for k, v in data.items():
            if k not in known:
                raise ParamError('unknown recipe space key: {}'.format(k))
            kwargs[k] = tuple(v)
        return cls(**kwargs)

    def sample(self, h: int, w: int, seed: int) -> RainRecipe:
        rng = np.random.default_rng(seed)
        length = int(rng.integers(self.length_px[0], self.length_px[1] + 1))
        width = int(rng.integers(self.width_px[0], self.width_px[1] + 1))
        streak = StreakParams(
            count=int(rng.integers(self.count[0], self.count[1] + 1)),
            angle_deg=_uniform(rng, self.angle_deg),
            length_px=min(length, max(h, w)),
            width_px=min(width, min(h, w)),
            intensity=_uniform(rng, self.intensity),
            seed=int(rng.integers(0, 2 ** 31 - 1)),
        )
        return RainRecipe(
            streak_pattern=streak.rasterize(h, w),
            alpha=_uniform(rng, self.alpha),
            beta=_uniform(rng, self.beta),
            atm_light=_uniform(rng, self.atm_light),
            d1=_uniform(rng, self.d1),
            seed=seed,
            streak=streak,
        )
