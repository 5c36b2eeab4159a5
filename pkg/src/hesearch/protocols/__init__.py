from .ledger import CostLedger, RoleCost, SessionTranscript, TranscriptEntry
from .schemes import (
    Client,
    MatchSets,
    QueryResult,
    Scheme,
    Server,
    StoredRecord,
    UploadResult,
    compute_encrypted_distance,
    default_pad_count,
    pad_index_set,
    query,
    revised_query,
    scheme1_query,
    scheme2_query,
    upload,
    verify_transcript,
)
from .wire import Channel, MessageKind, frame, parse_frame

__all__ = [
    "Channel",
    "Client",
    "CostLedger",
    "MatchSets",
    "MessageKind",
    "QueryResult",
    "RoleCost",
    "Scheme",
    "Server",
    "SessionTranscript",
    "StoredRecord",
    "TranscriptEntry",
    "UploadResult",
    "compute_encrypted_distance",
    "default_pad_count",
    "frame",
    "pad_index_set",
    "parse_frame",
    "query",
    "revised_query",
    "scheme1_query",
    "scheme2_query",
    "upload",
    "verify_transcript",
]
