from .graph import Graph, Trace, as_tensor, backward, evaluate
from .gradcheck import check_graph_gradients, finite_diff_gradient, relative_error
from .optim import AdamState, adam_step, init_adam
