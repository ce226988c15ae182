"""
Factories for the small model and training configs the tests run with.
"""
import factory

from apps.backbone.config import BackboneConfig
from apps.datasets.splits import SplitSpec
from apps.training.config import TrainConfig
from apps.tsh.config import TSHConfig


class BackboneConfigFactory(factory.Factory):
    """8x8 four-band images, 2x2 token grid."""

    class Meta:
        model = BackboneConfig

    field_extents = (1, 1, 8, 8)
    components = 4
    patch_size = (4, 4)
    embed_dim = 8
    depth = 1
    heads = 2
    mlp_ratio = 2
    dropout_rate = 0.0


class TSHConfigFactory(factory.Factory):
    class Meta:
        model = TSHConfig

    conv_channels = 4
    conv_kernel = 3
    dense_dims = (8, 4)
    scalar_mlp_dims = (8, 4)
    dropout_rate = 0.0
    n_params_out = 3


class TrainConfigFactory(factory.Factory):
    class Meta:
        model = TrainConfig

    epochs = 3
    batch_size = 4
    lr_backbone = 1e-3
    lr_tsh = 1e-3
    weight_decay = 0.01
    seed = factory.Sequence(lambda n: n)
    warmup_epochs = 1


class SplitSpecFactory(factory.Factory):
    class Meta:
        model = SplitSpec

    seed = 0
    ratios = (0.8, 0.1, 0.1)
    train_fraction = None


# RunConfig document small enough for end-to-end command runs on 8x8 data.
TINY_RUN_CONFIG = {
    'train': {
        'epochs': 2,
        'batch_size': 8,
        'lr_backbone': 1e-3,
        'lr_tsh': 1e-3,
        'warmup_epochs': 0,
        'seed': 0,
    },
    'backbone': {'embed_dim': 8, 'depth': 1, 'heads': 2, 'patch_size': [4, 4]},
    'tsh': {'conv_channels': 4, 'dense_dims': [8, 4], 'scalar_mlp_dims': [8, 4], 'dropout_rate': 0.0},
    'split': {'seed': 0},
    'sensitivity': {'n_components': 4, 'alpha': 1.0},
}

# Default-size runs used by the slow outcome tests.
DEFAULT_SAMPLES = 2000
DEFAULT_SIZE = 16
DEFAULT_EPOCHS = 50
