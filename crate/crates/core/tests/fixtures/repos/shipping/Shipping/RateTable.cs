using System;
using System.Collections.Generic;
using System.Linq;

namespace Shipping
{
    public class RateTable
    {
        private readonly SortedDictionary<double, decimal> _bands = new SortedDictionary<double, decimal>();
        private readonly Dictionary<ServiceLevel, decimal> _multipliers = new Dictionary<ServiceLevel, decimal>
        {
            [ServiceLevel.Economy] = 0.8m,
            [ServiceLevel.Standard] = 1.0m,
            [ServiceLevel.Express] = 1.75m,
        };

        public decimal InternationalSurcharge { get; set; } = 12.50m;

        public void AddBand(double upToKg, decimal price)
        {
            if (upToKg <= 0)
            {
                throw new ArgumentException("band limit must be positive", nameof(upToKg));
            }
            _bands[upToKg] = price;
        }

        public decimal BasePrice(double weightKg)
        {
            foreach (var band in _bands)
            {
                if (weightKg <= band.Key)
                {
                    return band.Value;
                }
            }
            throw new InvalidOperationException($"no rate band covers {weightKg} kg");
        }

        public decimal Quote(Parcel parcel, string originCountry)
        {
            var price = BasePrice(parcel.ChargeableWeightKg) * _multipliers[parcel.Level];
            if (parcel.IsInternational(originCountry))
            {
                price += InternationalSurcharge;
            }
            return Math.Round(price, 2, MidpointRounding.ToEven);
        }

        public IEnumerable<(double Limit, decimal Price)> Bands()
        {
            return _bands.Select(b => (b.Key, b.Value));
        }

        public static RateTable Default()
        {
            var table = new RateTable();
            table.AddBand(1.0, 4.90m);
            table.AddBand(5.0, 7.50m);
            table.AddBand(10.0, 11.20m);
            table.AddBand(Parcel.MaxWeightKg, 18.90m);
            return table;
        }
    }
}
