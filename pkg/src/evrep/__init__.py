"""Event-camera stream processing: windowed frame representations and
detector-ready dataset curation."""

from .errors import (
    BadMagicError,
    CountMismatchError,
    DegenerateBoxError,
    EventOutsideWindowError,
    EvrepError,
    IllegalPolarityError,
    OutOfBoundsError,
    ParseError,
    RangeViolationError,
    TimeBeforeOriginError,
    TruncatedFileError,
    UnknownReferenceError,
)
from .events import (
    Event,
    EventStream,
    SensorGeometry,
    normalize_stream,
    validate_event,
    validate_stream,
)
from .windowing import (
    PixelState,
    PixelStateMap,
    WindowConfig,
    accumulate,
    stream_windows,
    window_index,
    window_map,
    window_span,
)
from .representations import (
    Channel,
    ChannelRange,
    DEFAULT_FUSION_ORDER,
    FusedFrame,
    decaying_time_surface,
    event_frame,
    event_frequency,
    fuse,
    quantize_byte,
    quantize_signed,
    render_plane,
)
from .formats import (
    AnnotationRecord,
    export_image,
    iter_events_evt1,
    read_annotations_csv,
    read_events_csv,
    read_events_evt1,
    read_evt1_header,
    write_annotations_csv,
    write_events_csv,
    write_events_evt1,
    write_yolo_labels,
    yolo_label_line,
    yolo_label_text,
)
from .dataset import (
    DatasetConfig,
    DatasetManifest,
    DensityVerdict,
    FrameRecord,
    apply_verdicts,
    build_dataset,
    density_verdict,
    extract_crops,
    filter_sequences_by_class,
    load_dataset_config,
    read_manifest,
    split_dataset,
    write_manifest,
)
from .synth import MovingBarScenario, generate_moving_bar, moving_bar_truth
from .bench import BenchReport, bench_throughput

__version__ = "0.1.0"
