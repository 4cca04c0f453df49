from enum import Enum


class Mode(Enum):
    """Enum of the modes a compute graph may be evaluated in."""
    TRAIN = 'train'
    """Dropout active, batch-norm normalizes with batch statistics."""
    EVAL = 'eval'
    """Deterministic: dropout disabled, batch-norm uses running statistics."""


class Modality(Enum):
    """Enum of the input branches a ResNet-like model consumes."""
    BOTH = 'both'
    """Video and audio branches, concatenated before the projection."""
    VIDEO_ONLY = 'video_only'
    """Single video branch."""
    AUDIO_ONLY = 'audio_only'
    """Single audio branch."""


class Activation(Enum):
    """Hidden nonlinearity of a ResNet-like model."""
    RELU = 'relu'
    TANH = 'tanh'


class Architecture(Enum):
    """Architecture tags written into model files."""
    RESNETLIKE = 'resnetlike'
    """Residual MLP over video-level features."""
    VLADBOW = 'vladbow'
    """Learnable bag-of-words with a trainable power, then a ResNet-like head."""
    FRAMEMIX = 'framemix'
    """Trainable linear combinations of frames, then a ResNet-like head."""
    HEAD = 'head'
    """Single affine + sigmoid classification layer used for stacking."""


class LossKind(Enum):
    """Enum of the training losses."""
    BCE = 'bce'
    """Binary cross-entropy, accepts soft targets."""
    SOFT_RANK = 'soft_rank'
    """log(1 + exp(n - p + 1)) over positive/negative pairs."""
    HINGE_RANK = 'hinge_rank'
    """max(0, margin - (p - n)) over positive/negative pairs."""

    @property
    def is_ranking(self):
        return self is not LossKind.BCE


class TargetKind(Enum):
    """Kind of targets a training run fits."""
    HARD = 'hard'
    """Binary noisy labels."""
    SOFT = 'soft'
    """Confidences in [0, 1], as produced by an ensemble."""


class PairScope(Enum):
    """Which positive/negative pairs a ranking loss forms."""
    BATCH = 'batch'
    """Every positive in the batch against every selected negative in the batch."""
    PER_SAMPLE = 'per_sample'
    """Pairs only within the same sample."""


class LambdaMode(Enum):
    """Granularity of the mixup coefficient."""
    PER_BATCH = 'per_batch'
    """One Beta draw shared by the whole batch."""
    PER_EXAMPLE = 'per_example'
    """One Beta draw per example."""


class Representative(Enum):
    """Which frame stands for a scene."""
    MEAN = 'mean'
    """Mean vector of the scene's frames."""
    FIRST = 'first'
    """First frame of the scene."""


class Subsample(Enum):
    """Frame subsampling strategies."""
    RANDOM = 'random'
    REGULAR = 'regular'


class View(Enum):
    """Named ways of turning a dataset into model inputs."""
    PLAIN = 'plain'
    """Video-level features as stored."""
    FRAMESTATS = 'framestats'
    """Video-level features plus statistics over all frames."""
    SCENESTATS = 'scenestats'
    """Video-level features plus statistics over one frame per scene."""
    CENTROIDSTATS = 'centroidstats'
    """Video-level features plus statistics over frames with unique nearest centroids."""
    CENTEREDSTATS = 'centeredstats'
    """Video-level features plus statistics over per-video centered frames."""
    FRAMES = 'frames'
    """Padded frame sequences with a validity mask."""

    @property
    def needs_frames(self):
        return self is not View.PLAIN


class ErrorClass(Enum):
    """Per (video, label) outcome of the error analysis."""
    TP = 'TP'
    """Positive label scored above every negative label of the video."""
    FP = 'FP'
    """Top-ranked negative label scored above at least one positive label."""
    FN = 'FN'
    """Positive label scored at or below some negative label."""


class LabelSource(Enum):
    """Which label set of a record serves as ground truth."""
    NOISY = 'noisy'
    CLEAN = 'clean'
