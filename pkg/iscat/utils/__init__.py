from .timing import timing
from .threads import init_threads, num_threads, ordered_map

__all__ = ["timing", "init_threads", "num_threads", "ordered_map"]
