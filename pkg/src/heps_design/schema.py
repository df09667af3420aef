import pyarrow as pa

dataset_schema = pa.schema([
    ('P_W', pa.float64()),
    ('V2_V', pa.float64()),
    ('S', pa.string()),
    ('Din', pa.float64()),
    ('Do', pa.float64()),
    ('Ploss_W', pa.float64()),
    ('nZVS', pa.int32()),
    ('Irms_A', pa.float64()),
    ('eta', pa.float64()),
    ('feasible', pa.bool_()),
])

map_schema = pa.schema([
    ('P_W', pa.float64()),
    ('V2_V', pa.float64()),
    ('S', pa.string()),
    ('Din_opt', pa.float64()),
    ('Ploss_opt_W', pa.float64()),
    ('nZVS_opt', pa.float64()),
    ('provenance', pa.string()),
])

# per-strategy optimum of every map cell
candidate_schema = pa.schema([
    ('P_W', pa.float64()),
    ('V2_V', pa.float64()),
    ('S', pa.string()),
    ('Din_opt', pa.float64()),
    ('fitness', pa.float64()),
    ('Ploss_W', pa.float64()),
    ('nZVS', pa.float64()),
])

comparison_schema = pa.schema([
    ('P_W', pa.float64()),
    ('V2_V', pa.float64()),
    ('scheme', pa.string()),
    ('S', pa.string()),
    ('Din', pa.float64()),
    ('Ploss_W', pa.float64()),
    ('nZVS', pa.int32()),
    ('eta', pa.float64()),
    ('feasible', pa.bool_()),
])

waveform_schema = pa.schema([
    ('t_s', pa.float64()),
    ('vp_V', pa.float64()),
    ('vs_V', pa.float64()),
    ('iL_A', pa.float64()),
])

SCHEMAS = {
    "dataset": dataset_schema,
    "map": map_schema,
    "candidates": candidate_schema,
    "comparison": comparison_schema,
    "waveform": waveform_schema,
}
