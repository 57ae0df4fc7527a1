# dyadic-capacity v1.0
# Core modules
