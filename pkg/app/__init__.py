# TrapTP simulator package
