from .folds import FoldSplit, make_folds, read_folds, write_folds
from .records import Dataset, GeneratorConfig, NoiseConfig, VideoRecord
from .synthetic import corrupt_labels, generate_synthetic
