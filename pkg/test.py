from src.data_model import summary_table
from src.synthetic import SyntheticSpec, generate_synthetic

spec = SyntheticSpec.from_bundled("momentum", n_assets=4, horizon=250)
data = generate_synthetic(spec, seed=7)
table = summary_table({a: data.returns.series(a) for a in data.returns.asset_ids})
print(f'\n📊 TOTAL DATES: {data.returns.n_dates}')
print(f'📋 ASSETS: {list(data.returns.asset_ids)}')
print(f'🔀 REGIME-1 SHARE: {data.regimes.states.mean():.3f}')
print(table.to_string())
