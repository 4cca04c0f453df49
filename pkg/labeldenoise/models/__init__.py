from .builder import LOGITS, PENULTIMATE, PROBABILITIES
from .config import (FrameMixConfig, HeadConfig, ResNetLikeConfig, VladBowConfig, load_model_config,
                     model_config_from_dict, with_dataset_dims)
from .framemix import forward_framemix
from .params import ModelParams, build_graph, init_model, parameter_count, predict
from .resnetlike import forward_resnetlike
from .vladbow import forward_vladbow
