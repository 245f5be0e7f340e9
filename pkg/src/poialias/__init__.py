"""POI alias discovery from delivery addresses and user GPS locations.

Names written in delivery addresses often refer to the same place under
different spellings or entirely different aliases. This toolkit links
them by comparing the spatial footprints of the users who wrote each
name: the GPS points of a name's writers concentrate around the place it
denotes, so two names for one place produce similar point distributions.
"""

__version__ = "0.1.0"
