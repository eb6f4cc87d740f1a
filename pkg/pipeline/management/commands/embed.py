from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Extract patch embeddings with each trained pretext network'
    stage = 'embed'

    def run_stage(self, config, options):
        return StageService.embed(config)
