"""Validate the bundled model fixtures against docs/model.schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "docs" / "model.schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
for name in ["reference_model", "binary_copy_3", "two_ring_heterogeneous"]:
    jsonschema.validate(json.loads((root / "fixtures" / f"{name}.json").read_text()), schema)
structure = json.loads((root / "fixtures" / "reference_structure.json").read_text())
try:
    jsonschema.validate(structure, schema)
    sys.exit("structure file unexpectedly passes the model schema")
except jsonschema.ValidationError:
    pass
print("model schema accepts every model fixture")
