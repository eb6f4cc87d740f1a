from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Evaluate every extractor with patch SVM, vote, concat and sum'
    stage = 'eval'
    per_extractor = True

    def run_stage(self, config, options):
        return StageService.eval(config, options.get('extractor'))
