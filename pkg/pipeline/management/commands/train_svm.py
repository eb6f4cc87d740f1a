from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Train the patch-level and slice-level SVMs for every extractor'
    stage = 'train_svm'
    per_extractor = True

    def run_stage(self, config, options):
        return StageService.train_svm(config, options.get('extractor'))
