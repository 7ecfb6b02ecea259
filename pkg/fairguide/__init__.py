"""FairGuide - fairness-guided link addition for attributed graphs."""

__version__ = "0.1.0"
__author__ = "FairGuide Team"
__description__ = "Add a budget of links to a graph so downstream tasks become less biased"
