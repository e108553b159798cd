"""tmlpredict: predictive multilingual evaluation under restricted evidence.

Answers "how will model family M perform on task T in language L?" by
classifying the query into an evidence scenario, investigating hypotheses
through a DAG of agents over a reduced evidence corpus, and scoring the
resulting predictions against combined-corpus ground truth.
"""

__version__ = "0.1.0"
