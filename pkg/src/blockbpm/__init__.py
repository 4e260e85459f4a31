"""blockbpm: agent-based business process models as block diagrams.

Core pieces: the subject-oriented metamodel and its validators (model),
geometric block diagrams with docking and routing (blocks), user-defined
notations with conformance checking and quality analysis (notation),
diagram-to-model translation (translate), deterministic choreography
execution (engine), bounded state-space verification (explore), and the
versioned document formats (persistence). The FastAPI service and the CLI
are thin shells over these.
"""

__version__ = "0.1.0"
