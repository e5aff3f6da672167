"""ECG ingestion: format-212 signals, annotations, beat segments and splits."""

from ecgbo.ecg.beats import (
    BEAT_CLASSES,
    BeatSegment,
    SplitDataset,
    class_counts,
    load_csv,
    normalize_segment,
    segment_beats,
    split,
    split_counts,
    stratified_subset,
    to_arrays,
    write_csv,
)
from ecgbo.ecg.wfdb import (
    Annotation,
    Recording,
    decode_wfdb212,
    encode_wfdb212,
    read_annotations,
    read_signal,
    write_annotations,
    write_signal,
)

__all__ = [
    "BEAT_CLASSES", "BeatSegment", "SplitDataset", "class_counts", "load_csv",
    "normalize_segment", "segment_beats", "split", "split_counts", "stratified_subset",
    "to_arrays", "write_csv", "Annotation", "Recording", "decode_wfdb212", "encode_wfdb212",
    "read_annotations", "read_signal", "write_annotations", "write_signal",
]
