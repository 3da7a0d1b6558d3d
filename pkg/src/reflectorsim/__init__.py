"""Deterministic 28 GHz indoor ray tracing with passive reflectors."""

from .config import default_config, load_config, load_scene
from .em import (OpticalRegimeWarning, Polarization, antenna_gain, directive_scatter, fresnel,
                 fspl_db, lobe_normalization, rcs, spreading_and_phase)
from .link import (ChannelImpulseResponse, LinkResult, bin_cir, coherent_power)
from .scene import (AntennaSpec, ConfigError, CorridorParams, Cylinder, FlatPlate, Material,
                    ReceiverGrid, ReflectorSpec, Scene, Sphere, Surface, make_corridor,
                    mirror_point, orient_flat_reflector)
from .sweep import (CoverageMap, TraceOptions, cdf, decile_gains, median_gain, run_grid,
                    uniformity)
from .tracer import (Interaction, PropagationPath, Tracer, occluded, trace_all, trace_diffuse,
                     trace_reflector, trace_specular)

__all__ = [
    "AntennaSpec", "ChannelImpulseResponse", "ConfigError", "CorridorParams", "CoverageMap",
    "Cylinder", "FlatPlate", "Interaction", "LinkResult", "Material", "OpticalRegimeWarning",
    "Polarization", "PropagationPath", "ReceiverGrid", "ReflectorSpec", "Scene", "Sphere",
    "Surface", "TraceOptions", "Tracer", "antenna_gain", "bin_cir", "cdf", "coherent_power",
    "decile_gains", "default_config", "directive_scatter", "fresnel", "fspl_db", "load_config",
    "load_scene", "lobe_normalization", "make_corridor", "median_gain", "mirror_point",
    "occluded", "orient_flat_reflector", "rcs", "run_grid", "spreading_and_phase",
    "trace_all", "trace_diffuse", "trace_reflector", "trace_specular", "uniformity",
]
