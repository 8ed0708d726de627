# Command-line services
