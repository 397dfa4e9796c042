from enum import Enum, unique
from typing import FrozenSet


@unique
class DepthRelation(Enum):
    """
    How the depth relation map compares a query depth with a key depth.
    """
    # min(D_i/(D_j+eps), D_j/(D_i+eps))
    SYMMETRIC = "symmetric"
    # min(D_i/(D_i+eps), D_j/(D_j+eps))
    LITERAL = "literal"


@unique
class UpsampleMode(Enum):
    BILINEAR = "bilinear"
    NEAREST = "nearest"


@unique
class KeySampling(Enum):
    """
    Where the non-local keys come from.
    """
    # attention-weighted pyramid pooling over the full resolution map
    PYRAMID = "pyramid"
    # every position of the query resolution map, uniform weights
    IDENTITY = "identity"


@unique
class Branch(Enum):
    SUPERVISED = "supervised"
    UNSUPERVISED = "unsupervised"


@unique
class LossTerm(Enum):
    MULTI = "multi"
    ADV_SUPER = "adv_super"
    CYC = "cyc"
    ADV_UNSUPER = "adv_unsuper"
    DC = "dc"
    TV = "tv"
    PER = "per"

    @property
    def branch(self) -> Branch:
        if self in (LossTerm.MULTI, LossTerm.ADV_SUPER):
            return Branch.SUPERVISED
        return Branch.UNSUPERVISED


_LOSS_ORDER = list(LossTerm)


@unique
class LossVariant(Enum):
    """
    Loss ablation grid. Each variant adds one term to the previous one,
    V0 is the plain image reconstruction loss without depth supervision.
    """
    V0 = ("V0", 1)
    V1 = ("V1", 1)
    V2 = ("V2", 2)
    V3 = ("V3", 3)
    V4 = ("V4", 4)
    V5 = ("V5", 5)
    V6 = ("V6", 6)
    V7 = ("V7", 7)

    def __init__(self, label: str, term_count: int):
        self.__label = label
        self.__term_count = term_count

    @property
    def label(self) -> str:
        return self.__label

    @property
    def terms(self) -> FrozenSet[LossTerm]:
        return frozenset(_LOSS_ORDER[:self.__term_count])

    @property
    def depth_supervised(self) -> bool:
        return self is not LossVariant.V0

    @property
    def semi_supervised(self) -> bool:
        return any(t.branch is Branch.UNSUPERVISED for t in self.terms)

    @classmethod
    def from_label(cls, label: str) -> "LossVariant":
        for v in cls:
            if v.label == label.upper():
                return v
        raise ValueError("unknown loss variant: {}".format(label))


@unique
class ComponentSet(Enum):
    """
    Component ablation grid of the generator.
    """
    M_A = ("M-A", 0, False, False, None)
    M_B = ("M-B", 4, False, False, None)
    M_C = ("M-C", 4, True, False, None)
    M_D = ("M-D", 4, True, True, None)
    M_E = ("M-E", 4, True, True, KeySampling.IDENTITY)
    OURS = ("Ours", 4, True, True, KeySampling.PYRAMID)

    def __init__(self, label: str, cfab_count: int, depth_net: bool, attention: bool, non_local):
        self.__label = label
        self.__cfab_count = cfab_count
        self.__depth_net = depth_net
        self.__attention = attention
        self.__non_local = non_local

    @property
    def label(self) -> str:
        return self.__label

    @property
    def cfab_count(self) -> int:
        return self.__cfab_count

    @property
    def depth_net(self) -> bool:
        return self.__depth_net

    @property
    def attention(self) -> bool:
        return self.__attention

    @property
    def non_local(self):
        """KeySampling of the non-local stage, None when features and depth are multiplied."""
        return self.__non_local

    @classmethod
    def from_label(cls, label: str) -> "ComponentSet":
        for c in cls:
            if c.label.lower() == label.lower() or c.name.lower() == label.lower():
                return c
        raise ValueError("unknown component set: {}".format(label))
