"""Two-server secure computation between CP and CSP."""

from .parties import REVEALABLE, CloudPlatform, ComputeProvider, Transcript, View
from .transport import (
    Frame,
    FrameServer,
    InProcessTransport,
    ProtocolId,
    SocketTransport,
    Transport,
    decode_frame,
    encode_frame,
)


def in_process_pair(params, shares, *, rng=None, transcript=None, record_views=False):
    """CP and CSP wired through a byte-level loopback transport."""
    csp = ComputeProvider(params, shares.lambda2, rng=rng, record_views=record_views)
    cp = CloudPlatform(
        params, shares.lambda1, InProcessTransport(csp.handle_bytes), rng=rng, transcript=transcript
    )
    return cp, csp


__all__ = [
    "REVEALABLE",
    "CloudPlatform",
    "ComputeProvider",
    "Frame",
    "FrameServer",
    "InProcessTransport",
    "ProtocolId",
    "SocketTransport",
    "Transcript",
    "Transport",
    "View",
    "decode_frame",
    "encode_frame",
    "in_process_pair",
]
