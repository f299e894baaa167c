"""Party engines, transports, sessions and traffic accounting."""
from .accounting import REFERENCE_RELU_COSTS, AccountingView, Flight, TrafficAccounting
from .config import ConfigError, SessionConfig
from .party import Party, ProtocolError, Shadow
from .session import SessionResult, run_local, run_party
from .transport import LinkClosed, LocalHub, TcpTransport
from .wire import ClipRecord, DecodeError, Message, MsgType, decode_message, encode_message

__all__ = [
    "REFERENCE_RELU_COSTS", "AccountingView", "Flight", "TrafficAccounting", "ConfigError",
    "SessionConfig", "Party", "ProtocolError", "Shadow", "SessionResult", "run_local",
    "run_party", "LinkClosed", "LocalHub", "TcpTransport", "ClipRecord", "DecodeError",
    "Message", "MsgType", "decode_message", "encode_message",
]
