"""evpipe: event-camera / RGB / odometry synchronization pipeline.

Converts asynchronous event streams, frame logs, and robot twist logs into
temporally aligned (RGB, event-histogram, action) training tuples, with a
synthetic scene generator and evaluation harness for desk-scale validation.
"""

__version__ = "0.1.0"
