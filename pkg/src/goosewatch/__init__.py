"""Multi-view anomaly detection toolkit for IEC 61850 GOOSE network traffic.

The pipeline is file-based and runs in five stages, each with its own
module and CLI subcommand:

    synth    -> capture.pcap + labels.csv     (goosewatch.synth)
    extract  -> features.csv                  (goosewatch.pcapio/windows/features)
    train    -> profile.json                  (goosewatch.autoencoder/evt)
    detect   -> verdicts.csv + attributions   (goosewatch.detector)
    eval     -> report.csv                    (goosewatch.detector)
"""

__version__ = "0.1.0"

from goosewatch.codec import GooseFrame, decode_frame, encode_frame

__all__ = ["GooseFrame", "decode_frame", "encode_frame", "__version__"]
