"""Block-oriented systems: blocks, graphs, operating points, simulation."""
from .blocks import RationalTF, StaticNL
from .graph import (BlockGraph, Edge, Node, Violation, check_graph, custom,
                    evaluation_order, ff_fb_parallel, hammerstein, lfr, parallel_wh,
                    single_branch, symmetric_fffb, validate_graph, wiener,
                    wiener_hammerstein)
from .setpoint import OperatingPoint, solve_setpoint, sweep_setpoints
from .simulate import (available_backends, compile_graph, default_warmup, get_backend,
                       set_backend, simulate)

build_wiener = wiener
build_hammerstein = hammerstein
build_wiener_hammerstein = wiener_hammerstein
build_parallel_wh = parallel_wh
build_ff_fb_parallel = ff_fb_parallel
build_lfr = lfr
build_symmetric_fffb = symmetric_fffb
