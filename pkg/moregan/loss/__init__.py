from moregan.loss.losses import multi_task_loss, lsgan_g_loss, lsgan_d_loss, cycle_loss, dark_channel, \
    dc_loss, tv_loss, perceptual_loss
from moregan.loss.perceptual import FeatureExtractor, IdentityExtractor, Vgg16Extractor
from moregan.loss.weights import LossWeights, LossReport, total_loss
