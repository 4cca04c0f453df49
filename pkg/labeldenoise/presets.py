"""
Named defaults of the command line.

``desk`` is small enough to run the whole pipeline on a laptop; ``paperlike`` keeps the dims, vocabulary and
ResNet-like width of the large-scale setting for shape and size checks.

The model zoo derives every first-level model and student from the preset's base ResNet-like config and
training config, so a ``--model-config`` file applied to the base changes the whole zoo consistently.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Tuple

from .data.records import GeneratorConfig, NoiseConfig
from .enums import Activation, LossKind, Modality, TargetKind, View
from .errors import InputError
from .models import FrameMixConfig, ResNetLikeConfig, VladBowConfig
from .pipeline import StageSpec
from .training import TrainConfig
from .views import ViewOptions

logger = logging.getLogger(__name__)

MB = 1 << 20
GB = 1 << 30

FIRST_LEVEL = ('resnet_both', 'resnet_audio', 'resnet_video', 'resnet_framestats')


@dataclass
class Preset:
    """
    :ivar model: Base ResNet-like config of the zoo.
    :ivar train: Base training config of the zoo.
    :ivar head_train: Training config of the stacking head.
    :ivar k: Number of folds.
    :ivar budget_bytes: Size budget of the final model.
    :ivar first_level: Zoo names trained on the noisy labels.
    :ivar students: Student names distilled on the soft labels.
    """
    name: str
    generator: GeneratorConfig
    noise: NoiseConfig
    model: ResNetLikeConfig
    train: TrainConfig
    head_train: TrainConfig
    k: int = 4
    budget_bytes: int = 50 * MB
    first_level: Tuple[str, ...] = FIRST_LEVEL
    students: Tuple[str, ...] = ('student_base', 'student_deep', 'student_tanh')
    view_options: ViewOptions = field(default_factory=ViewOptions)


def desk():
    return Preset(
        name='desk',
        generator=GeneratorConfig(),
        noise=NoiseConfig(fn_rate=0.5, fp_rate=1.0),
        model=ResNetLikeConfig(video_dim=64, audio_dim=16, vocabulary_size=50, inner_size=64),
        train=TrainConfig(epochs=12, batch_size=64, lr=2e-3, patience=3),
        head_train=TrainConfig(epochs=30, batch_size=128, lr=1e-2, patience=None),
        view_options=ViewOptions(clusters=32),
    )


def paperlike():
    return Preset(
        name='paperlike',
        generator=GeneratorConfig(videos=1000, vocabulary_size=3862, video_dim=1024, audio_dim=128,
                                  max_labels=5, n_groups=25),
        noise=NoiseConfig(fn_rate=0.5, fp_rate=1.0),
        model=ResNetLikeConfig(video_dim=1024, audio_dim=128, vocabulary_size=3862, inner_size=2048),
        train=TrainConfig(epochs=20, batch_size=256, lr=1e-3, warmup_steps=100),
        head_train=TrainConfig(epochs=10, batch_size=256, lr=1e-3, patience=None),
        k=5,
        budget_bytes=GB,
        students=('student_base', 'student_tanh'),
        view_options=ViewOptions(clusters=256),
    )


PRESETS = {'desk': desk, 'paperlike': paperlike}


def get_preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise InputError(f"Unknown preset {name!r}, expected one of {', '.join(PRESETS)}.")


def _frame_head(model):
    return replace(model, modality=Modality.VIDEO_ONLY, view=View.PLAIN)


def zoo(preset):
    """Every named first-level model: name to (model config, training config)."""
    model, train = preset.model, preset.train
    frame_dim = preset.generator.video_dim + preset.generator.audio_dim
    vocabulary_size = preset.generator.vocabulary_size

    return {
        'resnet_both': (model, train),
        'resnet_mixup': (model, replace(train, mixup=True)),
        'resnet_video': (replace(model, modality=Modality.VIDEO_ONLY), train),
        'resnet_audio': (replace(model, modality=Modality.AUDIO_ONLY), train),
        'resnet_bottleneck': (replace(model, inner_size=4), train),
        'resnet_rank': (model, replace(train, loss=LossKind.SOFT_RANK)),
        'resnet_framestats': (replace(model, view=View.FRAMESTATS), train),
        'resnet_scenestats': (replace(model, view=View.SCENESTATS, view_options=preset.view_options), train),
        'resnet_centroids': (replace(model, view=View.CENTROIDSTATS, view_options=preset.view_options), train),
        'resnet_centered': (replace(model, view=View.CENTEREDSTATS), train),
        'vladbow': (VladBowConfig(frame_dim=frame_dim, vocabulary_size=vocabulary_size,
                                  max_frames=preset.view_options.max_frames, head=_frame_head(model)), train),
        'framemix': (FrameMixConfig(frame_dim=frame_dim, vocabulary_size=vocabulary_size,
                                    max_frames=preset.view_options.max_frames, head=_frame_head(model)), train),
    }


def student_zoo(preset):
    """Students differ from the base config in depth, width or activation; all fit soft labels."""
    model = preset.model
    train = replace(preset.train, targets=TargetKind.SOFT, loss=LossKind.BCE, mixup=False)
    return {
        'student_base': (model, train),
        'student_deep': (replace(model, av_id_block_num=2, concat_id_block_num=2), train),
        'student_wide': (replace(model, inner_size=2 * model.inner_size), train),
        'student_narrow': (replace(model, inner_size=max(1, model.inner_size // 2)), train),
        'student_tanh': (replace(model, activation=Activation.TANH), train),
    }


def _specs(table, names, what):
    unknown = [name for name in names if name not in table]
    if unknown:
        raise InputError(f"Unknown {what} {', '.join(unknown)}, expected some of {', '.join(table)}.")
    return [StageSpec(name, *table[name]) for name in names]


def first_level_specs(preset, names=None):
    return _specs(zoo(preset), names or preset.first_level, 'model(s)')


def student_specs(preset, names=None):
    return _specs(student_zoo(preset), names or preset.students, 'student(s)')
