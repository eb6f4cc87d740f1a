from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Import externally computed patch embeddings (EMB1 or CSV)'
    stage = 'import_embeddings'

    def run_stage(self, config, options):
        return StageService.import_embeddings(config)
