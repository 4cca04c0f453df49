"""
Architecture configurations. Each class carries its :class:`~labeldenoise.enums.Architecture` tag and
knows which feature view feeds it.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from typing import ClassVar

from ..config import from_dict, merge
from ..enums import Activation, Architecture, Modality, View
from ..errors import FormatError, InputError
from ..views import ViewOptions

logger = logging.getLogger(__name__)


@dataclass
class ResNetLikeConfig:
    """Residual MLP over video-level features.

    :ivar video_dim: D_v of the stored features; the view decides the actual input width.
    :ivar audio_dim: D_a of the stored features.
    :ivar inner_size: Width of every hidden layer.
    :ivar av_id_block_num: Identity blocks per modality branch.
    :ivar concat_id_block_num: Identity blocks after the projection of the concatenated branches.
    :ivar dropout_rate: Inverted-dropout rate inside identity blocks.
    """
    architecture: ClassVar[Architecture] = Architecture.RESNETLIKE

    video_dim: int = 64
    audio_dim: int = 16
    vocabulary_size: int = 50
    inner_size: int = 2048
    av_id_block_num: int = 1
    concat_id_block_num: int = 1
    dropout_rate: float = 0.5
    modality: Modality = Modality.BOTH
    activation: Activation = Activation.RELU
    view: View = View.PLAIN
    view_options: ViewOptions = field(default_factory=ViewOptions)

    def validate(self):
        if self.inner_size < 1:
            raise InputError(f"inner_size must be at least 1, got {self.inner_size}.")
        if self.av_id_block_num < 0 or self.concat_id_block_num < 0:
            raise InputError("Block counts must be non-negative.")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InputError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}.")
        if min(self.video_dim, self.audio_dim, self.vocabulary_size) < 1:
            raise InputError("Feature dims and vocabulary size must be positive.")
        if self.view is View.FRAMES:
            raise InputError("A ResNet-like model consumes video-level views, not padded frames.")
        return self


@dataclass
class VladBowConfig:
    """Learnable bag-of-words over frames: softmax(relu(W x + b) ** p) summed over valid frames.

    Only the width, depth, dropout and activation of `head` are used; its input is the K-dim BOW.
    """
    architecture: ClassVar[Architecture] = Architecture.VLADBOW

    frame_dim: int = 80
    clusters: int = 32
    power: float = 1.0
    max_frames: int = 32
    vocabulary_size: int = 50
    head: ResNetLikeConfig = field(default_factory=lambda: ResNetLikeConfig(
        inner_size=64, modality=Modality.VIDEO_ONLY))

    @property
    def view(self):
        return View.FRAMES

    @property
    def view_options(self):
        return ViewOptions(max_frames=self.max_frames)

    def validate(self):
        if self.clusters < 1:
            raise InputError(f"clusters must be at least 1, got {self.clusters}.")
        if not self.power > 0:
            raise InputError(f"Initial power must be positive, got {self.power}.")
        if min(self.frame_dim, self.max_frames, self.vocabulary_size) < 1:
            raise InputError("frame_dim, max_frames and vocabulary_size must be positive.")
        self.head.validate()
        return self


@dataclass
class FrameMixConfig:
    """m trainable linear combinations of the padded frames, concatenated and fed to a ResNet-like head."""
    architecture: ClassVar[Architecture] = Architecture.FRAMEMIX

    frame_dim: int = 80
    combinations: int = 4
    max_frames: int = 32
    vocabulary_size: int = 50
    head: ResNetLikeConfig = field(default_factory=lambda: ResNetLikeConfig(
        inner_size=64, modality=Modality.VIDEO_ONLY))

    @property
    def view(self):
        return View.FRAMES

    @property
    def view_options(self):
        return ViewOptions(max_frames=self.max_frames)

    def validate(self):
        if self.combinations < 1 or self.max_frames < 1:
            raise InputError("combinations and max_frames must be at least 1.")
        if min(self.frame_dim, self.vocabulary_size) < 1:
            raise InputError("frame_dim and vocabulary_size must be positive.")
        self.head.validate()
        return self


@dataclass
class HeadConfig:
    """The stacking classification layer: one affine map and a sigmoid."""
    architecture: ClassVar[Architecture] = Architecture.HEAD

    input_dim: int = 1
    vocabulary_size: int = 50

    def validate(self):
        if self.input_dim < 1 or self.vocabulary_size < 1:
            raise InputError("Head input width and vocabulary size must be positive.")
        return self


CONFIGS = {cls.architecture: cls for cls in (ResNetLikeConfig, VladBowConfig, FrameMixConfig, HeadConfig)}


def config_class(architecture):
    try:
        return CONFIGS[Architecture(architecture)]
    except ValueError:
        choices = ', '.join(member.value for member in Architecture)
        raise InputError(f"Unknown architecture {architecture!r}, expected one of {choices}.")


def model_config_from_dict(mapping):
    """Build any model config from a mapping carrying an ``architecture`` key (default resnetlike)."""
    mapping = dict(mapping)
    cls = config_class(mapping.pop('architecture', Architecture.RESNETLIKE.value))
    return from_dict(cls, mapping)


def load_model_config(path, base):
    """Apply a JSON model-config file on top of a preset config.

    A file naming a different ``architecture`` than `base` starts from that architecture's defaults.
    """
    if path is None:
        return base

    try:
        with open(path, encoding='utf-8') as f:
            overrides = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: line {e.lineno}: {e.msg}")

    if not isinstance(overrides, dict):
        raise InputError(f"{path}: expected a JSON object.")

    architecture = overrides.pop('architecture', base.architecture.value)
    if config_class(architecture) is not type(base):
        return model_config_from_dict({'architecture': architecture, **overrides})

    return merge(base, overrides)


def with_dataset_dims(config, dataset):
    """Copy of `config` whose feature dims and vocabulary follow `dataset`."""
    if isinstance(config, ResNetLikeConfig):
        updated = replace(config, video_dim=dataset.video_dim, audio_dim=dataset.audio_dim,
                          vocabulary_size=dataset.vocabulary_size)
    elif isinstance(config, (VladBowConfig, FrameMixConfig)):
        updated = replace(config, frame_dim=dataset.frame_dim, vocabulary_size=dataset.vocabulary_size)
    else:
        updated = replace(config, vocabulary_size=dataset.vocabulary_size)

    return updated.validate()
