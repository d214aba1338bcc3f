"""Sign-bit gradient synchronization over multi-hop all-reduce, with a desk-scale simulator."""
from .analysis import avg_bits_per_element, deviation_experiment, matching_rate
from .collective import (allreduce_dense, allreduce_sign, build_ring_schedule,
                         build_torus_schedule, cascading_allreduce, sum_ssdm_allreduce)
from .compressor import AggregateSign, SsdmPacket, merge_signs, ssdm_compress, ssdm_decompress
from .errors import (ConfigError, DatasetError, MarsitError, ParameterError, ProtocolError,
                     UnsupportedError)
from .rng import RngStream
from .sync import SyncConfig, expected_update_check, marsit_round
from .trainer import RunConfig, TrainResult, train
from .vectorcore import PackedSignVector, Segmentation, pack_signs, unpack_to_update

__version__ = "0.1.0"
