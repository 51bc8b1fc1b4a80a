"""File persistence: config documents, box files, snapshots, parameters and sequences."""
