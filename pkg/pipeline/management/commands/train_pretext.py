from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Train the pretext network for each pretext fraction'
    stage = 'train_pretext'

    def run_stage(self, config, options):
        return StageService.train_pretext(config)
