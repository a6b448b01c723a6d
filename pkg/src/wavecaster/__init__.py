"""wavecaster: an ICY/SHOUTcast-compatible internet radio server.

Streams MP3 audio to concurrent listeners with real-time pacing, schedules
programs and synthesized announcements, and targets advertisements from
listeners' liked genres.
"""

__version__ = "0.1.0"
