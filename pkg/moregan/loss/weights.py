from typing import Dict, Optional, Union

import torch

from moregan.exceptions import ParamError
from moregan.model.enum import Branch, LossTerm, LossVariant

Scalar = Union[float, torch.Tensor]


class LossWeights:
    """
    Weights of the seven loss terms.

    Args:
        multi: multi-task regression (supervised)
        adv_super: adversarial term of the supervised branch
        cyc: cycle consistency (unsupervised)
        adv_unsuper: adversarial term of the unsupervised branch
        dc: dark channel prior
        tv: total variation
        per: perceptual
    """

    def __init__(self,
                 multi: float = 1.0,
                 adv_super: float = 0.5,
                 cyc: float = 1.0,
                 adv_unsuper: float = 0.5,
                 dc: float = 0.5,
                 tv: float = 0.1,
                 per: float = 0.5):
        self.multi = float(multi)
        self.adv_super = float(adv_super)
        self.cyc = float(cyc)
        self.adv_unsuper = float(adv_unsuper)
        self.dc = float(dc)
        self.tv = float(tv)
        self.per = float(per)
        for term in LossTerm:
            if self.weight(term) < 0:
                raise ParamError('loss weight {} must be non-negative, got {}'.format(
                    term.value, self.weight(term)))

    def weight(self, term: LossTerm) -> float:
        return getattr(self, term.value)

    def for_variant(self, variant: LossVariant) -> "LossWeights":
        """Copy with every term outside the variant set to zero."""
        kept = variant.terms
        return LossWeights(**{t.value: (self.weight(t) if t in kept else 0.0) for t in LossTerm})

    def scaled(self, term: LossTerm, factor: float) -> "LossWeights":
        values = vars(self)
        values[term.value] = values[term.value] * factor
        return LossWeights(**values)

    @property
    def __dict__(self):
        return {t.value: self.weight(t) for t in LossTerm}

    @classmethod
    def from_dict(cls, data: Dict) -> "LossWeights":
        unknown = set(data) - {t.value for t in LossTerm}
        if unknown:
            raise ParamError('unknown loss weight(s): {}'.format(sorted(unknown)))
        return cls(**data)


class LossReport:
    """
    Raw loss terms of one step and their weighted total.

    `value` is the differentiable total, `total` its float value; `terms` holds every
    raw term as a float, absent ones as 0.
    """

    def __init__(self, branch: Optional[Branch], terms: Dict[LossTerm, float], total: float,
                 value: Optional[torch.Tensor] = None):
        self.branch = branch
        self.terms = terms
        self.total = total
        self.value = value

    def term(self, term: LossTerm) -> float:
        return self.terms.get(term, 0.0)

    @property
    def __dict__(self):
        return {
            'branch': self.branch.value if self.branch is not None else None,
            'terms': {t.value: self.term(t) for t in LossTerm},
            'total': self.total,
        }


def _as_float(v: Scalar) -> float:
    if isinstance(v, torch.Tensor):
        return float(v.detach().cpu())
    return float(v)


def total_loss(terms: Dict[LossTerm, Scalar], weights: LossWeights,
               branch: Optional[Branch] = None) -> LossReport:
    """
    Weighted sum of the supplied loss terms.

    Args:
        terms: raw term values, tensors keep the total differentiable; absent terms count as zero
        weights: per-term weights
        branch: when set, every supplied term must belong to this branch

    Returns:
        LossReport
    """
    raw = {}
    total = 0.0
    value = None
    for term in LossTerm:
        if term not in terms:
            raw[term] = 0.0
            continue
        if branch is not None and term.branch is not branch:
            raise ParamError('{} term supplied to the {} branch'.format(term.value, branch.value))
        v = terms[term]
        raw[term] = _as_float(v)
        w = weights.weight(term)
        if w == 0.0:
            continue
        total += w * raw[term]
        if isinstance(v, torch.Tensor):
            value = w * v if value is None else value + w * v
    return LossReport(branch, raw, total, value)
