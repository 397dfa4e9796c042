from moregan.rainsim.recipe import RainRecipe, RecipeSpace, StreakParams
from moregan.rainsim.physics import make_streak_pattern, streak_layer, haze_layer, compose, \
    compose_with_mask, invert, degrade, check_image
from moregan.rainsim.dataset import synthesize_dataset, read_manifest, verify_manifest
