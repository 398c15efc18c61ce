from .erf import CenterError, ErfMap, erf_map
from .heatmap import bilinear_upsample, m_heatmap
from .pgm import read_pgm, read_ppm, to_uint8, write_pgm, write_ppm
from .stability import (
    TRACE_COLUMNS,
    StabilityTrace,
    comparative_report,
    stability_probe,
    write_trace_csv,
)
