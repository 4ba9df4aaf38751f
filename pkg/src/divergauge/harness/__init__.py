from .config import experiment_config_from_file, experiment_config_from_text, parse_config_text
from .evaluate import MetricRecord, RunReport, evaluate, load_run
from .experiment import (
    ExperimentConfig,
    ProviderSpec,
    config_hash,
    derive_seed,
    open_session,
    run_experiment,
)
from .ingest import (
    DatasetPrompt,
    Sample,
    SampleSet,
    ingest_dataset,
    ingest_dataset_file,
    read_dataset,
    read_samples,
    reference_sample_sets,
    reference_samples_records,
    write_dataset,
    write_samples,
)
from .prompts import build_prompt, make_incipit
from .report import render_markdown, write_csv_tables
