# This package holds the task-space controllers of the project. Each module
# defines controller classes with a unique ``name`` class attribute, which is
# how experiment files and the ``ntstsm`` command refer to them.
