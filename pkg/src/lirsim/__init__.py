"""Link-identified routing for LEO polar constellations: Bloom-filter source
routing, segment encoding, failure handling and multicast, with a
packet-level simulator and closed-form overhead models."""

__version__ = "0.1.0"
